//! Non-learning reference points: random feasible actions and zero forcing
//! with random surface phases.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{effective_channel, ChannelRealization};
use crate::complexlin::CMatrix;
use crate::env::{score_point, Action, EnvConfig, FeasiblePoint, RisEnv};
use crate::error::{Error, Result};

/// `HHᴴ` above this Frobenius condition number is treated as singular.
pub const ZF_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Random,
    ZeroForcingRandomPhase,
}

impl BaselineKind {
    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::Random => "random",
            BaselineKind::ZeroForcingRandomPhase => "zero_forcing_random_phase",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub point: FeasiblePoint,
    pub rates: Vec<f64>,
    pub reward: f64,
    /// Matched filtering replaced zero forcing.
    pub fallback: bool,
}

/// Projects and scores a uniform random raw action on the env's current channel.
pub fn random_baseline<R: Rng + ?Sized>(rng: &mut R, env: &RisEnv) -> Result<BaselineResult> {
    let eval = env.evaluate(&Action::random(rng, &env.dims()))?;
    Ok(BaselineResult {
        point: eval.point,
        rates: eval.rates,
        reward: eval.reward,
        fallback: false,
    })
}

/// Zero forcing on the effective channel produced by random surface phases.
pub fn zf_baseline<R: Rng + ?Sized>(rng: &mut R, env: &RisEnv) -> Result<BaselineResult> {
    zf_on_channel(rng, env.config(), env.channel()?, env.presence()?)
}

pub fn zf_on_channel<R: Rng + ?Sized>(
    rng: &mut R,
    config: &EnvConfig,
    channel: &ChannelRealization,
    presence: &[bool],
) -> Result<BaselineResult> {
    let dims = config.dims();
    let refl = &config.reflection;
    let phases: Vec<Vec<f64>> = (0..dims.surfaces)
        .map(|_| {
            (0..dims.elements)
                .map(|_| rng.random_range(refl.theta_min..=refl.theta_max))
                .collect()
        })
        .collect();
    let reflections = phases
        .iter()
        .map(|p| refl.build_reflection_matrix(p, dims.elements))
        .collect::<Result<Vec<_>>>()?;
    let h = effective_channel(channel, &reflections)?;
    let (w, fallback) = zero_forcing_precoder(&h, presence, config.p_max)?;
    let point = FeasiblePoint { w, phases, reflections };
    let (rates, reward) = score_point(channel, &point, config.noise_power(), presence)?;
    Ok(BaselineResult {
        point,
        rates,
        reward,
        fallback,
    })
}

/// `W = Hᴴ(HHᴴ)⁻¹` over the present UEs, each column unit-normalized and
/// scaled to `√(P_max / K_present)`; absent columns stay zero. Falls back to
/// matched filtering `h_kᴴ/‖h_k‖` when `K_present > M` or `HHᴴ` is near
/// singular, and reports the fallback.
pub fn zero_forcing_precoder(h: &[Vec<Complex64>], presence: &[bool], p_max: f64) -> Result<(CMatrix, bool)> {
    if h.len() != presence.len() {
        return Err(Error::Shape("one presence flag per channel row is required".into()));
    }
    let active: Vec<usize> = (0..h.len()).filter(|&k| presence[k]).collect();
    if active.is_empty() {
        return Err(Error::config("experiment.ue_count", "no UE is present"));
    }
    let m = h[active[0]].len();
    let k_count = h.len();
    let rows = CMatrix::from_fn(active.len(), m, |i, j| h[active[i]][j]);

    let zf = if active.len() <= m {
        let gram = rows.matmul(&rows.hermitian())?;
        if gram.condition_frobenius() < ZF_CONDITION_LIMIT {
            rows.right_pseudo_inverse()
        } else {
            None
        }
    } else {
        None
    };
    let fallback = zf.is_none();
    let directions = zf.unwrap_or_else(|| rows.hermitian());

    let per_user = (p_max / active.len() as f64).sqrt();
    let mut w = CMatrix::zeros(m, k_count);
    for (col, &k) in active.iter().enumerate() {
        let v = directions.column_vec(col);
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            let scaled: Vec<Complex64> = v.iter().map(|z| z * (per_user / norm)).collect();
            w.set_column(k, &scaled);
        }
    }
    Ok((w, fallback))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelParams, Topology};
    use crate::complexlin::dot;
    use crate::env::{per_ue_rate, UeCount};
    use crate::ris::ReflectionParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_rows(rng: &mut ChaCha8Rng, k: usize, m: usize) -> Vec<Vec<Complex64>> {
        (0..k)
            .map(|_| (0..m).map(|_| crate::channel::complex_gaussian(rng)).collect())
            .collect()
    }

    fn config(count: usize) -> EnvConfig {
        EnvConfig {
            topology: Topology {
                bs_antennas: 4,
                num_ris: 1,
                ris_rows: 2,
                ris_cols: 2,
                ue_slots_per_ris: 3,
                ..Default::default()
            },
            channel: ChannelParams::default(),
            reflection: ReflectionParams::default(),
            p_max: 0.1,
            ue_count: UeCount::Fixed { count },
        }
    }

    #[test]
    fn single_user_is_matched_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_rows(&mut rng, 1, 4);
        let (w, fallback) = zero_forcing_precoder(&h, &[true], 2.0).unwrap();
        assert!(!fallback);
        let norm: f64 = h[0].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for m in 0..4 {
            let expected = h[0][m].conj() / norm * 2f64.sqrt();
            assert!((w[(m, 0)] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn interference_is_nulled_and_budget_met() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let h = random_rows(&mut rng, 3, 5);
            let p = 0.5;
            let (w, fallback) = zero_forcing_precoder(&h, &[true; 3], p).unwrap();
            assert!(!fallback);
            assert!((w.frobenius_norm_sqr() / p - 1.0).abs() < 1e-12);
            for k in 0..3 {
                for i in 0..3 {
                    if i != k {
                        let leak = dot(&h[k], &w.column_vec(i)).norm_sqr();
                        assert!(leak <= 1e-8 * p, "{leak}");
                    }
                }
            }
        }
    }

    #[test]
    fn overloaded_or_singular_falls_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_rows(&mut rng, 3, 2);
        let (w, fallback) = zero_forcing_precoder(&h, &[true; 3], 1.0).unwrap();
        assert!(fallback);
        assert!((w.frobenius_norm_sqr() - 1.0).abs() < 1e-12);

        let row = random_rows(&mut rng, 1, 3).remove(0);
        let (_, fallback) = zero_forcing_precoder(&[row.clone(), row], &[true, true], 1.0).unwrap();
        assert!(fallback);
    }

    #[test]
    fn absent_users_get_zero_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_rows(&mut rng, 3, 4);
        let (w, _) = zero_forcing_precoder(&h, &[true, false, true], 1.0).unwrap();
        assert!(w.column_vec(1).iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert!((w.frobenius_norm_sqr() - 1.0).abs() < 1e-12);
        assert!(zero_forcing_precoder(&h, &[false; 3], 1.0).unwrap_err().is_config_error());
    }

    #[test]
    fn baselines_are_feasible_and_reproducible() {
        let cfg = config(2);
        let mut env = RisEnv::new(cfg.clone());
        env.reset(&mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        for seed in 0..20 {
            let r1 = random_baseline(&mut ChaCha8Rng::seed_from_u64(seed), &env).unwrap();
            let r2 = random_baseline(&mut ChaCha8Rng::seed_from_u64(seed), &env).unwrap();
            assert_eq!(r1.reward, r2.reward);
            assert!(r1.reward >= 0.0);
            let z = zf_baseline(&mut ChaCha8Rng::seed_from_u64(seed), &env).unwrap();
            for res in [&r1, &z] {
                assert!(res.point.transmit_power() <= cfg.p_max * (1.0 + 1e-9));
                for p in res.point.phases.iter().flatten() {
                    assert!(*p >= cfg.reflection.theta_min && *p <= cfg.reflection.theta_max);
                }
            }
            assert!((z.point.transmit_power() / cfg.p_max - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zf_reward_matches_rate_oracle() {
        let cfg = config(3);
        let mut env = RisEnv::new(cfg.clone());
        env.reset(&mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let z = zf_baseline(&mut ChaCha8Rng::seed_from_u64(7), &env).unwrap();
        let h = effective_channel(env.channel().unwrap(), &z.point.reflections).unwrap();
        let rates = per_ue_rate(&h, &z.point.w, cfg.noise_power(), env.presence().unwrap()).unwrap();
        assert_eq!(rates, z.rates);
    }

    #[test]
    fn zf_mean_rate_grows_with_power() {
        let base = config(2);
        let mut previous = 0.0;
        for dbm in [0.0, 10.0, 20.0, 30.0] {
            let cfg = EnvConfig {
                p_max: crate::channel::dbm_to_watts(dbm),
                ..base.clone()
            };
            let mut env = RisEnv::new(cfg);
            let mut total = 0.0;
            for i in 0..20 {
                env.reset(&mut ChaCha8Rng::seed_from_u64(100 + i)).unwrap();
                total += zf_baseline(&mut ChaCha8Rng::seed_from_u64(i), &env).unwrap().reward;
            }
            assert!(total >= previous);
            previous = total;
        }
    }
}
