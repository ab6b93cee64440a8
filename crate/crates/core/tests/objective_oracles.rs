use diging::objectives::{HuberSpec, LocalObjective, QuadraticSpec, REFERENCE_TOL};
use diging::{ProblemInstance, ProblemKind};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn least_squares(seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let locals = (0..4)
        .map(|_| LocalObjective::LeastSquares {
            a: DMatrix::from_fn(8, 3, |_, _| rng.sample(StandardNormal)),
            b: DVector::from_fn(8, |_, _| rng.sample(StandardNormal)),
        })
        .collect();
    ProblemInstance::new(locals).unwrap()
}

fn instances() -> Vec<ProblemInstance> {
    let mut huber = HuberSpec::new(4, 3, 10);
    // a small threshold puts many residuals in the linear region
    huber.threshold = 0.3;
    vec![
        QuadraticSpec::new(4, 3).generate(11).unwrap(),
        least_squares(12),
        huber.generate(13).unwrap(),
    ]
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for inst in instances() {
        let mut worst = 0.0_f64;
        for _ in 0..200 {
            let agent = rng.random_range(0..inst.agents());
            let x = random_point(&mut rng, inst.dim(), 2.0);
            let g = inst.gradient(agent, &x).unwrap();
            let mut fd = vec![0.0; inst.dim()];
            for j in 0..inst.dim() {
                let h = 1e-6 * (1.0 + x[j].abs());
                let mut plus = x.clone();
                let mut minus = x.clone();
                plus[j] += h;
                minus[j] -= h;
                fd[j] = (inst.value(agent, &plus).unwrap() - inst.value(agent, &minus).unwrap())
                    / (2.0 * h);
            }
            let rel = norm(&diff(&g, &fd)) / norm(&g).max(1.0);
            worst = worst.max(rel);
        }
        assert!(
            worst <= 1e-5,
            "{:?}: worst relative error {worst}",
            inst.kind()
        );
    }
}

#[test]
fn lipschitz_and_strong_convexity_witnesses() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for inst in instances() {
        let profile = inst.profile().clone();
        for _ in 0..200 {
            let agent = rng.random_range(0..inst.agents());
            let x = random_point(&mut rng, inst.dim(), 3.0);
            let y = random_point(&mut rng, inst.dim(), 3.0);
            let gx = inst.gradient(agent, &x).unwrap();
            let gy = inst.gradient(agent, &y).unwrap();
            let dxy = diff(&x, &y);
            let l = profile.per_agent_l()[agent];
            let mu = profile.per_agent_mu()[agent];
            assert!(norm(&diff(&gx, &gy)) <= l * norm(&dxy) * (1.0 + 1e-9));
            let inner: f64 = diff(&gx, &gy).iter().zip(&dxy).map(|(a, b)| a * b).sum();
            let scale = 1.0 + inner.abs();
            assert!(
                inner >= mu * norm(&dxy).powi(2) - 1e-9 * scale,
                "{:?}",
                inst.kind()
            );
        }
    }
}

#[test]
fn reference_solution_is_stationary() {
    for inst in instances() {
        let sol = inst.solve_reference(REFERENCE_TOL).unwrap();
        let g = inst.mean_gradient(&sol.x_star).unwrap();
        assert!(norm(&g) <= 1e-10, "{:?}: {}", inst.kind(), norm(&g));
    }
}

#[test]
fn text_format_round_trips_every_kind() {
    for inst in instances() {
        let back = ProblemInstance::from_text(&inst.to_text()).unwrap();
        assert_eq!(back, inst);
    }
    assert_eq!(instances()[2].kind(), ProblemKind::Huber);
}
