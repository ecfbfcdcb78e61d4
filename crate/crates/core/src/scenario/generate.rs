//! Seeded random scripts for differential and property testing.
//!
//! Scripts mix well-formed sessions with the usual ways things go wrong:
//! wrong payer, wrong amount, late payment, underfunded owners, stray quota
//! calls, double votes and injected deployment failures.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::amount::{Amount, WEI_PER_ETH, WEI_PER_GWEI};
use crate::contracts::{ConstraintTerms, ContractKindTag, ProviderOffer, Vote};
use crate::pricing::{QosPreferences, VideoQuality};

use super::script::{
    Action, JitterConfig, ScenarioConfig, ScenarioScript, ScriptEvent, SharePart, SharesSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorLimits {
    pub max_actors: usize,
    pub max_contracts: usize,
    pub max_events: usize,
}

impl Default for GeneratorLimits {
    fn default() -> Self {
        GeneratorLimits {
            max_actors: 5,
            max_contracts: 8,
            max_events: 100,
        }
    }
}

const KINDS: [ContractKindTag; 7] = [
    ContractKindTag::FixedPrice,
    ContractKindTag::DynamicPrice,
    ContractKindTag::TimeLimitedQuota,
    ContractKindTag::FlexiblePeriod,
    ContractKindTag::IncomeDivision,
    ContractKindTag::ConsensusDecision,
    ContractKindTag::ConstraintBased,
];

struct Builder {
    rng: ChaCha8Rng,
    actors: Vec<String>,
    events: Vec<ScriptEvent>,
}

impl Builder {
    fn pick(&mut self) -> String {
        self.actors
            .choose(&mut self.rng)
            .expect("at least two actors")
            .clone()
    }

    fn push(&mut self, at: u64, actor: &str, action: Action) {
        self.events.push(ScriptEvent {
            at,
            actor: actor.to_string(),
            action,
        });
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn session(&mut self, label: String, kind: ContractKindTag) {
        let end_user = self.pick();
        let owner = if self.chance(0.9) {
            let others: Vec<String> = self.actors.iter().filter(|a| **a != end_user).cloned().collect();
            others.choose(&mut self.rng).expect("two actors").clone()
        } else {
            end_user.clone()
        };
        let period = *[60u64, 300, 900, 1_800, 3_600]
            .choose(&mut self.rng)
            .expect("nonempty");
        let period = if self.chance(0.2) {
            self.rng.gen_range(1..=3_600)
        } else {
            period
        };
        let prefs = QosPreferences {
            availability_target_bp: *[9_000u32, 9_950, 9_980, 10_000]
                .choose(&mut self.rng)
                .expect("nonempty"),
            video_quality: if self.chance(0.5) {
                VideoQuality::Hd
            } else {
                VideoQuality::Sd
            },
            max_period_seconds: period,
            monetization_kind: kind,
        };
        let constraints = (kind == ContractKindTag::ConstraintBased).then(|| ConstraintTerms {
            gdpr_required: self.chance(0.5),
            allowed_regions: match self.rng.gen_range(0..3) {
                0 => Default::default(),
                1 => ["EU".to_string()].into(),
                _ => ["US".to_string()].into(),
            },
            price_multiplier_bp: *[8_000u32, 10_000, 12_500]
                .choose(&mut self.rng)
                .expect("nonempty"),
        });
        let shares = (kind == ContractKindTag::IncomeDivision).then(|| {
            let mut parties = self.actors.clone();
            parties.shuffle(&mut self.rng);
            parties.truncate(self.rng.gen_range(1..=parties.len().min(3)));
            let parts: Vec<SharePart> = parties
                .into_iter()
                .map(|party| SharePart {
                    party,
                    numerator: self.rng.gen_range(1..=7),
                })
                .collect();
            let mut denominator: u64 = parts.iter().map(|p| p.numerator).sum();
            if self.chance(0.05) {
                denominator += 1;
            }
            SharesSpec {
                denominator,
                parties: parts,
            }
        });
        let voters = (kind == ContractKindTag::ConsensusDecision).then(|| {
            let mut v = self.actors.clone();
            v.shuffle(&mut self.rng);
            v.truncate(self.rng.gen_range(1..=v.len()));
            v
        });

        let t0 = self.rng.gen_range(0..600);
        let fail_deployment = self.chance(0.1);
        self.push(
            t0,
            &end_user,
            Action::RequestSession {
                session: label.clone(),
                owner: owner.clone(),
                prefs,
                constraints,
                shares,
                voters: voters.clone(),
                fail_deployment,
            },
        );

        let mut t = t0;
        if let Some(voters) = voters {
            for voter in voters {
                t += self.rng.gen_range(0..40);
                let choice = if self.chance(0.7) { Vote::Yes } else { Vote::No };
                self.push(
                    t,
                    &voter,
                    Action::Vote {
                        session: label.clone(),
                        choice,
                    },
                );
                if self.chance(0.1) {
                    self.push(
                        t,
                        &voter,
                        Action::Vote {
                            session: label.clone(),
                            choice,
                        },
                    );
                }
            }
            if self.chance(0.2) {
                let stranger = self.pick();
                self.push(
                    t,
                    &stranger,
                    Action::Vote {
                        session: label.clone(),
                        choice: Vote::Yes,
                    },
                );
            }
        }

        // quotes stay valid for a bounded number of blocks; sometimes pay late
        t += if self.chance(0.1) {
            self.rng.gen_range(600..1_200)
        } else {
            self.rng.gen_range(0..120)
        };
        let payer = if self.chance(0.1) {
            self.pick()
        } else {
            end_user.clone()
        };
        let value = self
            .chance(0.08)
            .then(|| Amount::from_wei(self.rng.gen_range(1..1_000_000)));
        self.push(
            t,
            &payer,
            Action::Pay {
                session: label.clone(),
                value,
            },
        );

        if kind == ContractKindTag::TimeLimitedQuota {
            for _ in 0..self.rng.gen_range(0..4) {
                if self.chance(0.1) {
                    self.push(
                        t,
                        &end_user,
                        Action::QuotaStop {
                            session: label.clone(),
                        },
                    );
                }
                t += self.rng.gen_range(0..60);
                self.push(
                    t,
                    &end_user,
                    Action::QuotaStart {
                        session: label.clone(),
                    },
                );
                if self.chance(0.1) {
                    self.push(
                        t,
                        &end_user,
                        Action::QuotaStart {
                            session: label.clone(),
                        },
                    );
                }
                t += self.rng.gen_range(1..=period.max(61));
                if self.chance(0.3) {
                    self.push(
                        t,
                        &end_user,
                        Action::Qos {
                            session: label.clone(),
                            available: true,
                        },
                    );
                }
                let caller = if self.chance(0.1) {
                    owner.clone()
                } else {
                    end_user.clone()
                };
                self.push(
                    t,
                    &caller,
                    Action::QuotaStop {
                        session: label.clone(),
                    },
                );
            }
            return;
        }

        let healthy = self.chance(0.75);
        let horizon = period + period / 5;
        let stop_at = self.chance(0.6).then(|| t + self.rng.gen_range(0..=horizon));
        let last = stop_at.unwrap_or(t + horizon);
        for _ in 0..self.rng.gen_range(0..6) {
            let at = self.rng.gen_range(t..=last);
            let available = if healthy {
                self.chance(0.97)
            } else {
                self.chance(0.5)
            };
            self.push(
                at,
                &owner,
                Action::Qos {
                    session: label.clone(),
                    available,
                },
            );
        }
        if let Some(at) = stop_at {
            let caller = if self.chance(0.1) {
                owner.clone()
            } else {
                end_user.clone()
            };
            self.push(
                at,
                &caller,
                Action::Stop {
                    session: label.clone(),
                },
            );
        }
    }
}

/// Builds a random but structurally valid script from `seed`.
pub fn random_script(seed: u64, limits: GeneratorLimits) -> ScenarioScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_actors = rng.gen_range(2..=limits.max_actors.max(2));
    let actors: Vec<String> = (0..n_actors).map(|i| format!("actor{i}")).collect();
    let mut genesis = BTreeMap::new();
    for name in &actors {
        let wei = match rng.gen_range(0..10) {
            0 => 0,
            1 => rng.gen_range(0..WEI_PER_ETH / 100),
            2 => rng.gen_range(0..WEI_PER_ETH),
            _ => rng.gen_range(1..=50) * WEI_PER_ETH,
        };
        genesis.insert(name.clone(), Amount::from_wei(wei));
    }

    let mut config = ScenarioConfig::default();
    if rng.gen_bool(0.5) {
        config.jitter = Some(JitterConfig {
            seed: rng.gen(),
            spread_seconds: rng.gen_range(0..=10),
        });
    }
    config.gas.gas_price = Amount::from_wei(u128::from(rng.gen_range(1..=40u64)) * WEI_PER_GWEI);
    config.rate_card.base_rate_wei_per_second =
        Amount::from_wei(rng.gen_range(1..=1_000) * 1_000_000_000_000);
    config.rate_card.quote_validity_blocks = rng.gen_range(2..=40);
    config.provider = ProviderOffer {
        region: if rng.gen_bool(0.7) { "EU" } else { "US" }.to_string(),
        gdpr_compliant: rng.gen_bool(0.7),
    };

    let mut builder = Builder {
        rng,
        actors: actors.clone(),
        events: Vec::new(),
    };
    let mut contracts = 0;
    let mut index = 0;
    while index < 5 {
        let kind = *KINDS.choose(&mut builder.rng).expect("nonempty");
        let cost = match kind {
            ContractKindTag::IncomeDivision | ContractKindTag::ConsensusDecision => 2,
            _ => 1,
        };
        if contracts + cost > limits.max_contracts {
            break;
        }
        contracts += cost;
        builder.session(format!("s{index}"), kind);
        index += 1;
        if builder.rng.gen_bool(0.25) {
            break;
        }
    }
    for _ in 0..builder.rng.gen_range(0..4) {
        let from = builder.pick();
        let to = builder.pick();
        let at = builder.rng.gen_range(0..2_000);
        let value = Amount::from_wei(builder.rng.gen_range(0..2 * WEI_PER_ETH));
        builder.push(at, &from, Action::Transfer { to, value });
    }

    let mut events = builder.events;
    // stable: a session's request keeps its place ahead of same-time events
    events.sort_by_key(|e| e.at);
    events.truncate(limits.max_events);
    ScenarioScript {
        config,
        genesis,
        events,
    }
}
