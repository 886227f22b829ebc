//! Finite-difference verification of every analytic gradient in the crate:
//! network weights, network inputs, and the barrier objective. Central
//! differences at step 1e-6 in double precision, 20 seeded random instances
//! each, max relative error below 1e-5.

use hvacopt_core::barrier::{barrier_grad, barrier_loss, BarrierProblem, PairMap, SurrogateModel};
use hvacopt_core::dataset::SequenceSample;
use hvacopt_core::rng::SplitMix64;
use hvacopt_core::rnn::{eval_mse, forward, grad_inputs, grad_weights, Mode, RnnModel};
use hvacopt_core::schema::{Block, Bounds, Feature, FeatureSchema};
use hvacopt_core::Mat;

const FD_STEP: f64 = 1e-6;
const MAX_REL_ERR: f64 = 1e-5;

fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / (analytic.abs() + 1e-8)
}

fn random_window(rng: &mut SplitMix64, rows: usize, cols: usize) -> Mat {
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..cols).map(|_| rng.next_range(-1.0, 1.0)).collect())
        .collect();
    Mat::from_rows(&data).unwrap()
}

#[test]
fn weight_gradients_match_central_differences_over_20_seeds() {
    for seed in 0..20u64 {
        let mut rng = SplitMix64::new(1000 + seed);
        let input_dim = 2 + (rng.next_below(3) as usize); // 2..=4
        let hidden = 2 + (rng.next_below(3) as usize); // 2..=4
        let steps = 2 + (rng.next_below(5) as usize); // window rows 2..=6 (T ≤ 5)
        let model = RnnModel::init(input_dim, hidden, &[3], 0.0, seed).unwrap();
        let batch: Vec<SequenceSample> = (0..3)
            .map(|i| SequenceSample {
                inputs: random_window(&mut rng, steps, input_dim),
                target: rng.next_range(-0.5, 0.5),
                origin_index: i,
            })
            .collect();

        let analytic = grad_weights(&model, &batch).unwrap().to_flat();
        let flat = model.to_flat();
        let mut max_rel: f64 = 0.0;
        for i in 0..flat.len() {
            let mut plus = flat.clone();
            plus[i] += FD_STEP;
            let mut minus = flat.clone();
            minus[i] -= FD_STEP;
            let mp = RnnModel::from_flat(input_dim, hidden, &[3], 0.0, &plus).unwrap();
            let mm = RnnModel::from_flat(input_dim, hidden, &[3], 0.0, &minus).unwrap();
            let fd =
                (eval_mse(&mp, &batch).unwrap() - eval_mse(&mm, &batch).unwrap()) / (2.0 * FD_STEP);
            max_rel = max_rel.max(rel_err(analytic[i], fd));
        }
        assert!(
            max_rel < MAX_REL_ERR,
            "seed {seed}: weight gradient max rel err {max_rel}"
        );
    }
}

#[test]
fn input_gradients_match_central_differences_over_20_seeds() {
    for seed in 0..20u64 {
        let mut rng = SplitMix64::new(2000 + seed);
        let input_dim = 2 + (rng.next_below(3) as usize);
        let hidden = 2 + (rng.next_below(3) as usize);
        let steps = 2 + (rng.next_below(6) as usize); // rows 2..=7 (T ≤ 6)
        let model = RnnModel::init(input_dim, hidden, &[3], 0.0, 77 + seed).unwrap();
        let window = random_window(&mut rng, steps, input_dim);

        let (_, analytic) = grad_inputs(&model, &window).unwrap();
        let mut max_rel: f64 = 0.0;
        for r in 0..steps {
            for c in 0..input_dim {
                let mut wp = window.clone();
                wp.set(r, c, window.get(r, c) + FD_STEP);
                let mut wm = window.clone();
                wm.set(r, c, window.get(r, c) - FD_STEP);
                let (pp, _) = forward(&model, &wp, Mode::Eval).unwrap();
                let (pm, _) = forward(&model, &wm, Mode::Eval).unwrap();
                let fd = (pp - pm) / (2.0 * FD_STEP);
                max_rel = max_rel.max(rel_err(analytic.get(r, c), fd));
            }
        }
        assert!(
            max_rel < MAX_REL_ERR,
            "seed {seed}: input gradient max rel err {max_rel}"
        );
    }
}

/// Schema with one paired temp/set pair, one unpaired uncontrollable, and
/// one physical feature — all the window-assembly cases at once.
fn barrier_schema() -> FeatureSchema {
    FeatureSchema::new(vec![
        Feature {
            name: "temp_0".into(),
            block: Block::Uncontrollable,
            bounds: Some(Bounds::new(-1.0, 1.0).unwrap()),
            pairing: Some(2),
        },
        Feature {
            name: "occ_0".into(),
            block: Block::Uncontrollable,
            bounds: None,
            pairing: None,
        },
        Feature {
            name: "set_0".into(),
            block: Block::Controllable,
            bounds: Some(Bounds::new(-1.0, 1.0).unwrap()),
            pairing: None,
        },
        Feature {
            name: "outdoor".into(),
            block: Block::Physical,
            bounds: None,
            pairing: None,
        },
    ])
    .unwrap()
}

#[test]
fn barrier_gradients_match_central_differences_over_20_seeds() {
    let schema = barrier_schema();
    let n = schema.len();
    for seed in 0..20u64 {
        let mut rng = SplitMix64::new(3000 + seed);
        let horizon = 1 + (rng.next_below(5) as usize); // T in 1..=5
        // The surrogate is a small random network over the window.
        let model = RnnModel::init(n, 3, &[2], 0.0, 500 + seed).unwrap();

        let mut history = Mat::zeros(horizon, n);
        for r in 0..horizon {
            for c in 0..n {
                history.set(r, c, rng.next_range(-0.8, 0.8));
            }
        }
        let mut exog = Mat::zeros(horizon + 1, n);
        for r in 0..=horizon {
            for c in 0..n {
                exog.set(r, c, rng.next_range(-0.8, 0.8));
            }
        }
        let bounds: Vec<Option<Bounds>> = (0..n)
            .map(|i| match schema.block(i) {
                Block::Controllable => Some(Bounds::new(-1.0, 1.0).unwrap()),
                Block::Uncontrollable if schema.pairing(i).is_some() => {
                    Some(Bounds::new(-1.5, 1.4).unwrap())
                }
                _ => None,
            })
            .collect();
        // Non-identity unit map on the paired measurement, as in the scaled
        // closed loop.
        let maps: Vec<Option<PairMap>> = (0..n)
            .map(|i| {
                (schema.block(i) == Block::Uncontrollable && schema.pairing(i).is_some()).then(
                    || PairMap {
                        scale: 1.3,
                        offset: -0.2,
                    },
                )
            })
            .collect();
        let problem = BarrierProblem::with_pair_maps(
            &model as &dyn SurrogateModel,
            history,
            exog,
            &schema,
            bounds,
            maps,
            2e-3,
            horizon,
        )
        .unwrap();
        let mut plan = problem.constant_plan(&[0.1]).unwrap();
        for r in 0..=horizon {
            plan.controls.set(r, 0, rng.next_range(-0.7, 0.7));
        }

        let (_, analytic) = barrier_grad(&problem, &plan).unwrap();
        let mut max_rel: f64 = 0.0;
        for r in 0..=horizon {
            let orig = plan.controls.get(r, 0);
            plan.controls.set(r, 0, orig + FD_STEP);
            let lp = barrier_loss(&problem, &plan).unwrap();
            plan.controls.set(r, 0, orig - FD_STEP);
            let lm = barrier_loss(&problem, &plan).unwrap();
            plan.controls.set(r, 0, orig);
            let fd = (lp - lm) / (2.0 * FD_STEP);
            max_rel = max_rel.max(rel_err(analytic.get(r, 0), fd));
        }
        assert!(
            max_rel < MAX_REL_ERR,
            "seed {seed}: barrier gradient max rel err {max_rel}"
        );
    }
}
