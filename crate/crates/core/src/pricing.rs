//! Quotes from QoS preferences, constraint-based adjustment, standby minimum
//! charges and the payment-method fee comparison.
//!
//! Everything here is a pure function of its inputs.

use serde::{Deserialize, Serialize};

use crate::amount::{Amount, BASIS_POINTS, WEI_PER_ETH, WEI_PER_GWEI};
use crate::contracts::{ConstraintEvaluation, ContractKindTag, FlexibleTerms};
use crate::error::{Error, Result};
use crate::ledger::{MAX_GAS_PRICE_GWEI, MIN_GAS_PRICE_GWEI};

const SECONDS_PER_MINUTE: u64 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VideoQuality {
    Sd,
    Hd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QosPreferences {
    pub availability_target_bp: u32,
    pub video_quality: VideoQuality,
    pub max_period_seconds: u64,
    pub monetization_kind: ContractKindTag,
}

impl QosPreferences {
    pub fn validate(&self) -> Result<()> {
        if self.availability_target_bp == 0 || self.availability_target_bp > BASIS_POINTS as u32 {
            return Err(Error::InvalidPreferences(format!(
                "availability target {} bp outside (0, 10000]",
                self.availability_target_bp
            )));
        }
        if self.max_period_seconds == 0 {
            return Err(Error::InvalidPreferences(
                "maximum period must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Deterministic stand-in for history-driven price estimation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateCard {
    pub base_rate_wei_per_second: Amount,
    pub sd_multiplier_bp: u32,
    pub hd_multiplier_bp: u32,
    /// Targets strictly above this get the high-availability multiplier.
    pub high_availability_threshold_bp: u32,
    pub high_availability_multiplier_bp: u32,
    pub standby_rate_wei_per_second: Amount,
    pub standby_window_seconds: u64,
    pub quote_validity_blocks: u64,
}

impl Default for RateCard {
    fn default() -> Self {
        RateCard {
            base_rate_wei_per_second: Amount::from_wei(100_000_000_000_000),
            sd_multiplier_bp: 10_000,
            hd_multiplier_bp: 15_000,
            high_availability_threshold_bp: 9_950,
            high_availability_multiplier_bp: 12_000,
            standby_rate_wei_per_second: Amount::from_wei(1_000_000_000_000),
            standby_window_seconds: 86_400,
            quote_validity_blocks: 40,
        }
    }
}

impl RateCard {
    fn quality_multiplier(&self, quality: VideoQuality) -> u32 {
        match quality {
            VideoQuality::Sd => self.sd_multiplier_bp,
            VideoQuality::Hd => self.hd_multiplier_bp,
        }
    }

    fn availability_multiplier(&self, target_bp: u32) -> u32 {
        if target_bp > self.high_availability_threshold_bp {
            self.high_availability_multiplier_bp
        } else {
            BASIS_POINTS as u32
        }
    }

    /// `base * seconds * quality * availability * constraint / 10000^3`,
    /// floored once.
    fn period_price(&self, seconds: u64, prefs: &QosPreferences, constraint_bp: u32) -> Result<Amount> {
        let base = self.base_rate_wei_per_second.checked_mul(u128::from(seconds))?;
        let multipliers = [
            self.quality_multiplier(prefs.video_quality),
            self.availability_multiplier(prefs.availability_target_bp),
            constraint_bp,
        ]
        .iter()
        .try_fold(1u128, |acc, m| acc.checked_mul(u128::from(*m)))
        .ok_or(Error::AmountOverflow)?;
        base.mul_div_floor(multipliers, BASIS_POINTS.pow(3))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Quote {
    pub kind: ContractKindTag,
    /// Total amount the end user locks.
    pub price: Amount,
    pub per_minute_price: Option<Amount>,
    pub minutes: Option<u64>,
    pub min_charge: Option<Amount>,
    pub constraint_multiplier_bp: u32,
    pub expires_at_block: u64,
}

pub fn quote_price(prefs: &QosPreferences, rate_card: &RateCard, issued_at_height: u64) -> Result<Quote> {
    prefs.validate()?;
    let identity = BASIS_POINTS as u32;
    let mut quote = Quote {
        kind: prefs.monetization_kind,
        price: Amount::ZERO,
        per_minute_price: None,
        minutes: None,
        min_charge: None,
        constraint_multiplier_bp: identity,
        expires_at_block: issued_at_height.saturating_add(rate_card.quote_validity_blocks),
    };
    match prefs.monetization_kind {
        ContractKindTag::TimeLimitedQuota => {
            let per_minute = rate_card.period_price(SECONDS_PER_MINUTE, prefs, identity)?;
            let minutes = prefs.max_period_seconds.div_ceil(SECONDS_PER_MINUTE);
            quote.per_minute_price = Some(per_minute);
            quote.minutes = Some(minutes);
            quote.price = per_minute.checked_mul(u128::from(minutes))?;
        }
        ContractKindTag::FlexiblePeriod => {
            let usage = rate_card.period_price(prefs.max_period_seconds, prefs, identity)?;
            let min_charge = standby_min_charge(
                rate_card.standby_rate_wei_per_second,
                rate_card.standby_window_seconds,
            )?;
            quote.min_charge = Some(min_charge);
            quote.price = usage.checked_add(min_charge)?;
        }
        _ => {
            quote.price = rate_card.period_price(prefs.max_period_seconds, prefs, identity)?;
        }
    }
    if quote.price.is_zero() || quote.per_minute_price == Some(Amount::ZERO) {
        return Err(Error::InvalidPreferences("rate card yields a zero price".into()));
    }
    Ok(quote)
}

pub fn standby_min_charge(standby_rate: Amount, standby_window_seconds: u64) -> Result<Amount> {
    Ok(FlexibleTerms::new(standby_rate, standby_window_seconds)?.min_charge)
}

pub fn apply_constraint_pricing(quote: &Quote, eval: &ConstraintEvaluation) -> Result<Quote> {
    if !eval.admissible {
        return Err(Error::InadmissibleOffer);
    }
    let price = quote.price.scale_bp(eval.price_multiplier_bp)?;
    if price.is_zero() {
        return Err(Error::InvalidPreferences(
            "constraint multiplier yields a zero price".into(),
        ));
    }
    Ok(Quote {
        price,
        constraint_multiplier_bp: eval.price_multiplier_bp,
        ..quote.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LockIn {
    Limited,
    Flexible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FeeMethodSpec {
    pub name: &'static str,
    /// `None` for gas-priced methods.
    pub fee_bp_range: Option<(u32, u32)>,
    pub merchant_min_bp: u32,
    pub merchant_fixed_usd_cents: u32,
    pub lockin: LockIn,
}

/// Card and wallet processing fees as of the first half of 2018.
pub const FEE_METHODS: [FeeMethodSpec; 4] = [
    FeeMethodSpec {
        name: "Visa",
        fee_bp_range: Some((143, 240)),
        merchant_min_bp: 125,
        merchant_fixed_usd_cents: 0,
        lockin: LockIn::Limited,
    },
    FeeMethodSpec {
        name: "Mastercard",
        fee_bp_range: Some((155, 260)),
        merchant_min_bp: 125,
        merchant_fixed_usd_cents: 5,
        lockin: LockIn::Limited,
    },
    FeeMethodSpec {
        name: "PayPal",
        fee_bp_range: Some((290, 440)),
        merchant_min_bp: 150,
        merchant_fixed_usd_cents: 0,
        lockin: LockIn::Limited,
    },
    FeeMethodSpec {
        name: "Ethereum",
        fee_bp_range: None,
        merchant_min_bp: 0,
        merchant_fixed_usd_cents: 0,
        lockin: LockIn::Flexible,
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeeQuery {
    pub amount_usd_cents: u64,
    pub eth_usd_cents: u64,
    pub gas_price_gwei: u64,
    pub gas_units: u64,
    pub enforce_gas_bounds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FeeRow {
    pub method: &'static str,
    pub fee_min_usd_cents: u128,
    pub fee_max_usd_cents: u128,
    /// Gas cost in wei, for gas-priced methods.
    pub fee_wei: Option<Amount>,
    pub proportional: bool,
    pub merchant_min_bp: u32,
    pub merchant_fixed_usd_cents: u32,
    pub lockin: LockIn,
}

pub fn compare_fee_methods(query: &FeeQuery) -> Result<Vec<FeeRow>> {
    if query.eth_usd_cents == 0 {
        return Err(Error::InvalidInput("ETH/USD rate must be positive".into()));
    }
    if query.enforce_gas_bounds && !(MIN_GAS_PRICE_GWEI..=MAX_GAS_PRICE_GWEI).contains(&query.gas_price_gwei)
    {
        return Err(Error::GasPriceOutOfRange {
            gwei: query.gas_price_gwei,
            min: MIN_GAS_PRICE_GWEI,
            max: MAX_GAS_PRICE_GWEI,
        });
    }
    let amount = Amount::from_wei(u128::from(query.amount_usd_cents));
    FEE_METHODS
        .iter()
        .map(|spec| {
            let (min, max, fee_wei) = match spec.fee_bp_range {
                Some((lo, hi)) => (amount.scale_bp(lo)?.wei(), amount.scale_bp(hi)?.wei(), None),
                None => {
                    let wei = Amount::from_wei(
                        u128::from(query.gas_price_gwei) * WEI_PER_GWEI * u128::from(query.gas_units),
                    );
                    let cents = wei.mul_div_floor(u128::from(query.eth_usd_cents), WEI_PER_ETH)?;
                    (cents.wei(), cents.wei(), Some(wei))
                }
            };
            Ok(FeeRow {
                method: spec.name,
                fee_min_usd_cents: min,
                fee_max_usd_cents: max,
                fee_wei,
                proportional: spec.fee_bp_range.is_some(),
                merchant_min_bp: spec.merchant_min_bp,
                merchant_fixed_usd_cents: spec.merchant_fixed_usd_cents,
                lockin: spec.lockin,
            })
        })
        .collect()
}

pub fn format_usd_cents(cents: u128) -> String {
    format!("${}.{:02}", cents / 100, cents % 100)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prefs(quality: VideoQuality, availability: u32, kind: ContractKindTag) -> QosPreferences {
        QosPreferences {
            availability_target_bp: availability,
            video_quality: quality,
            max_period_seconds: 3600,
            monetization_kind: kind,
        }
    }

    #[test]
    fn quote_examples() {
        let card = RateCard::default();
        let sd = quote_price(
            &prefs(VideoQuality::Sd, 9950, ContractKindTag::DynamicPrice),
            &card,
            0,
        )
        .unwrap();
        assert_eq!(sd.price.wei(), 360_000_000_000_000_000);
        let hd = quote_price(
            &prefs(VideoQuality::Hd, 9950, ContractKindTag::DynamicPrice),
            &card,
            0,
        )
        .unwrap();
        assert_eq!(hd.price.wei(), 540_000_000_000_000_000);
        let ha = quote_price(
            &prefs(VideoQuality::Hd, 9980, ContractKindTag::DynamicPrice),
            &card,
            0,
        )
        .unwrap();
        assert_eq!(ha.price.wei(), 648_000_000_000_000_000);
        assert_eq!(ha.expires_at_block, 40);
    }

    #[test]
    fn quota_quote_carries_per_minute_price() {
        let q = quote_price(
            &prefs(VideoQuality::Sd, 9000, ContractKindTag::TimeLimitedQuota),
            &RateCard::default(),
            3,
        )
        .unwrap();
        assert_eq!(q.per_minute_price.unwrap().wei(), 6_000_000_000_000_000);
        assert_eq!(q.minutes, Some(60));
        assert_eq!(q.price.wei(), 360_000_000_000_000_000);
    }

    #[test]
    fn flexible_quote_adds_standby() {
        let q = quote_price(
            &prefs(VideoQuality::Sd, 9000, ContractKindTag::FlexiblePeriod),
            &RateCard::default(),
            0,
        )
        .unwrap();
        assert_eq!(q.min_charge.unwrap().wei(), 86_400_000_000_000_000);
        assert_eq!(q.price.wei(), 360_000_000_000_000_000 + 86_400_000_000_000_000);
    }

    #[test]
    fn invalid_preferences() {
        let card = RateCard::default();
        let mut p = prefs(VideoQuality::Sd, 0, ContractKindTag::DynamicPrice);
        assert!(matches!(
            quote_price(&p, &card, 0),
            Err(Error::InvalidPreferences(_))
        ));
        p.availability_target_bp = 10_001;
        assert!(matches!(
            quote_price(&p, &card, 0),
            Err(Error::InvalidPreferences(_))
        ));
        p.availability_target_bp = 9000;
        p.max_period_seconds = 0;
        assert!(matches!(
            quote_price(&p, &card, 0),
            Err(Error::InvalidPreferences(_))
        ));
    }

    #[test]
    fn standby_charges() {
        assert_eq!(
            standby_min_charge(Amount::from_wei(1_000_000_000_000), 86_400)
                .unwrap()
                .wei(),
            86_400_000_000_000_000
        );
        assert!(standby_min_charge(Amount::from_wei(1), 0).is_err());
        assert_eq!(standby_min_charge(Amount::ZERO, 60).unwrap(), Amount::ZERO);
    }

    #[test]
    fn constraint_pricing() {
        let base = quote_price(
            &prefs(VideoQuality::Sd, 9000, ContractKindTag::ConstraintBased),
            &RateCard::default(),
            0,
        )
        .unwrap();
        let identity = ConstraintEvaluation {
            admissible: true,
            price_multiplier_bp: 10_000,
        };
        assert_eq!(apply_constraint_pricing(&base, &identity).unwrap(), base);

        let eth = Quote {
            price: Amount::from_eth(1).unwrap(),
            ..base.clone()
        };
        let scaled = apply_constraint_pricing(
            &eth,
            &ConstraintEvaluation {
                admissible: true,
                price_multiplier_bp: 12_000,
            },
        )
        .unwrap();
        assert_eq!(scaled.price.wei(), 1_200_000_000_000_000_000);
        assert_eq!(scaled.expires_at_block, eth.expires_at_block);

        let no = ConstraintEvaluation {
            admissible: false,
            price_multiplier_bp: 10_000,
        };
        assert_eq!(
            apply_constraint_pricing(&base, &no),
            Err(Error::InadmissibleOffer)
        );
    }

    fn query(amount_cents: u64) -> FeeQuery {
        FeeQuery {
            amount_usd_cents: amount_cents,
            eth_usd_cents: 50_000,
            gas_price_gwei: 20,
            gas_units: 21_000,
            enforce_gas_bounds: true,
        }
    }

    fn row(rows: &[FeeRow], name: &str) -> FeeRow {
        *rows.iter().find(|r| r.method == name).unwrap()
    }

    #[test]
    fn hundred_dollar_fee_table() {
        let rows = compare_fee_methods(&query(10_000)).unwrap();
        let visa = row(&rows, "Visa");
        assert_eq!((visa.fee_min_usd_cents, visa.fee_max_usd_cents), (143, 240));
        let mc = row(&rows, "Mastercard");
        assert_eq!((mc.fee_min_usd_cents, mc.fee_max_usd_cents), (155, 260));
        let paypal = row(&rows, "PayPal");
        assert_eq!((paypal.fee_min_usd_cents, paypal.fee_max_usd_cents), (290, 440));
        // 20 GWEI * 21000 gas = 4.2e-4 ETH; at $500 that is 21 cents
        let eth = row(&rows, "Ethereum");
        assert_eq!(eth.fee_wei.unwrap().wei(), 420_000_000_000_000);
        assert_eq!(eth.fee_min_usd_cents, 21);
        assert!(!eth.proportional);
        assert_eq!(eth.merchant_min_bp, 0);
        assert_eq!(format_usd_cents(paypal.fee_min_usd_cents), "$2.90");
    }

    #[test]
    fn gas_price_bounds() {
        let mut q = query(10_000);
        q.gas_price_gwei = 50;
        assert_eq!(
            compare_fee_methods(&q),
            Err(Error::GasPriceOutOfRange {
                gwei: 50,
                min: 1,
                max: 40
            })
        );
        q.enforce_gas_bounds = false;
        assert!(compare_fee_methods(&q).is_ok());
    }

    #[test]
    fn zero_amount() {
        let rows = compare_fee_methods(&query(0)).unwrap();
        for r in &rows {
            if r.proportional {
                assert_eq!(r.fee_max_usd_cents, 0);
            } else {
                assert!(r.fee_min_usd_cents > 0);
            }
        }
    }
}
