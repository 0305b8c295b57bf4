use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

use super::{PillarKind, PillarQuote};

/// ATM, risk-reversal and butterfly quotes at 25 and 10 delta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrBfQuotes {
    pub atm: f64,
    pub rr25: f64,
    pub bf25: f64,
    pub rr10: f64,
    pub bf10: f64,
}

/// Simple smile convention: `σ_call = σ_ATM + BF + RR/2`,
/// `σ_put = σ_ATM + BF − RR/2`. Returns the five pillars ordered
/// 10P, 25P, ATM, 25C, 10C.
pub fn convert_simple_rr_bf(q: &RrBfQuotes) -> Result<[PillarQuote; 5]> {
    ensure_positive(q.atm, "atm vol")?;
    for (v, what) in [
        (q.rr25, "rr25"),
        (q.bf25, "bf25"),
        (q.rr10, "rr10"),
        (q.bf10, "bf10"),
    ] {
        ensure_finite(v, what)?;
    }
    let put = |rr: f64, bf: f64| q.atm + bf - 0.5 * rr;
    let call = |rr: f64, bf: f64| q.atm + bf + 0.5 * rr;
    let out = [
        (PillarKind::put(0.10), put(q.rr10, q.bf10)),
        (PillarKind::put(0.25), put(q.rr25, q.bf25)),
        (PillarKind::Atm, q.atm),
        (PillarKind::call(0.25), call(q.rr25, q.bf25)),
        (PillarKind::call(0.10), call(q.rr10, q.bf10)),
    ];
    let mut pillars = [PillarQuote {
        kind: PillarKind::Atm,
        vol: q.atm,
    }; 5];
    for (slot, (kind, vol)) in pillars.iter_mut().zip(out) {
        if vol <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "{} vol {vol} is not positive",
                kind.label()
            )));
        }
        *slot = PillarQuote { kind, vol };
    }
    Ok(pillars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn vols(p: &[PillarQuote; 5]) -> [f64; 5] {
        [p[0].vol, p[1].vol, p[2].vol, p[3].vol, p[4].vol]
    }

    #[test]
    fn audnzd_conversion() {
        let q = RrBfQuotes {
            atm: 5.14,
            rr25: 0.40,
            bf25: 0.25,
            rr10: 0.35,
            bf10: 1.175,
        };
        let v = vols(&convert_simple_rr_bf(&q).unwrap());
        for (a, b) in v.iter().zip([6.14, 5.19, 5.14, 5.59, 6.49]) {
            assert_abs_diff_eq!(*a, b, epsilon = 0.005);
        }
    }

    #[test]
    fn flat_smile() {
        let q = RrBfQuotes {
            atm: 0.1,
            rr25: 0.0,
            bf25: 0.0,
            rr10: 0.0,
            bf10: 0.0,
        };
        assert!(vols(&convert_simple_rr_bf(&q).unwrap())
            .iter()
            .all(|v| *v == 0.1));
    }

    #[test]
    fn negative_wing_rejected() {
        let q = RrBfQuotes {
            atm: 0.1,
            rr25: 0.5,
            bf25: 0.0,
            rr10: 0.0,
            bf10: 0.0,
        };
        assert!(convert_simple_rr_bf(&q).is_err());
    }

    proptest! {
        #[test]
        fn recovers_rr_and_bf(atm in 4.0f64..30.0, rr25 in -3.0f64..3.0, bf25 in 0.0f64..2.0,
                              rr10 in -6.0f64..6.0, bf10 in 0.0f64..4.0) {
            let q = RrBfQuotes { atm, rr25, bf25, rr10, bf10 };
            let v = vols(&convert_simple_rr_bf(&q).unwrap());
            prop_assert!((v[3] - v[1] - rr25).abs() < 1e-12);
            prop_assert!((v[4] - v[0] - rr10).abs() < 1e-12);
            prop_assert!((0.5 * (v[3] + v[1]) - atm - bf25).abs() < 1e-12);
            prop_assert!((0.5 * (v[4] + v[0]) - atm - bf10).abs() < 1e-12);
        }
    }
}
