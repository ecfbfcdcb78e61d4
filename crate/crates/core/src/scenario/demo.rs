use std::collections::BTreeMap;

use crate::amount::{Amount, WEI_PER_ETH};
use crate::contracts::ContractKindTag;
use crate::pricing::{QosPreferences, VideoQuality};

use super::script::{Action, ScenarioConfig, ScenarioScript, ScriptEvent};

pub const DEMO_END_USER: &str = "alice";
pub const DEMO_OWNER: &str = "provider";
pub const DEMO_SESSION: &str = "call";

/// One-hour HD dynamic-price session at a 99.8 % availability target,
/// sampled every minute. The user stops after 30 minutes unless `timeout`
/// is set, in which case the alarm clock settles at the release time.
pub fn demo_script(timeout: bool) -> ScenarioScript {
    let event = |at: u64, actor: &str, action: Action| ScriptEvent {
        at,
        actor: actor.to_string(),
        action,
    };
    let session = || DEMO_SESSION.to_string();
    let mut events = vec![
        event(
            0,
            DEMO_END_USER,
            Action::RequestSession {
                session: session(),
                owner: DEMO_OWNER.to_string(),
                prefs: QosPreferences {
                    availability_target_bp: 9_980,
                    video_quality: VideoQuality::Hd,
                    max_period_seconds: 3_600,
                    monetization_kind: ContractKindTag::DynamicPrice,
                },
                constraints: None,
                shares: None,
                voters: None,
                fail_deployment: false,
            },
        ),
        event(
            15,
            DEMO_END_USER,
            Action::Pay {
                session: session(),
                value: None,
            },
        ),
    ];
    let end = if timeout { 3_600 } else { 1_800 };
    for minute in (60..end).step_by(60) {
        events.push(event(
            15 + minute,
            DEMO_OWNER,
            Action::Qos {
                session: session(),
                available: true,
            },
        ));
    }
    if !timeout {
        events.push(event(
            15 + 1_800,
            DEMO_END_USER,
            Action::Stop { session: session() },
        ));
    }
    ScenarioScript {
        config: ScenarioConfig::default(),
        genesis: BTreeMap::from([
            (DEMO_END_USER.to_string(), Amount::from_wei(10 * WEI_PER_ETH)),
            (DEMO_OWNER.to_string(), Amount::from_wei(WEI_PER_ETH)),
        ]),
        events,
    }
}
