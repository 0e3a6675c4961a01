mod common;

use common::*;
use rand::Rng;
use tsnet::markov::{reversed_generator, stationary_distribution, Generator};
use tsnet::models::*;
use tsnet::Error;

fn options(model: BuiltinModel) -> BuiltinOptions {
    match model {
        BuiltinModel::Sigma32 => BuiltinOptions { product_tail: Some(vec![1500.0, 1500.0, 1300.0]), ..Default::default() },
        _ => BuiltinOptions::default(),
    }
}

fn network(model: BuiltinModel) -> ReactionNetwork {
    match model.build(&options(model)).unwrap() {
        Model::Reaction(net) => net,
        Model::Diffusion(_) => panic!("{model} is not a reaction network"),
    }
}

#[test]
fn every_builtin_emits_a_valid_generator() {
    for model in BuiltinModel::ALL {
        let gen = model.build(&options(model)).unwrap().generator().unwrap();
        assert!(gen.len() > 1);
        assert!(gen.max_row_sum_error() <= 1e-12 * gen.max_exit_rate().max(1.0), "{model}");
        for i in 0..gen.len() {
            assert!(gen.out(i).all(|(j, r)| j != i && r >= 0.0));
        }
    }
}

#[test]
fn double_well_rate_by_hand() {
    let Model::Diffusion(m) = builtin_model("double-well").unwrap() else { panic!() };
    assert!((m.k_x_plus(0.0, 0.0) - 198.005).abs() < 1e-9);
    let gen = m.generator().unwrap();
    let s = gen.space();
    let o = s.locate(&[0.0, 0.0]).unwrap();
    assert!((gen.rate(s.locate(&[-0.05, 0.0]).unwrap(), o) - 198.005).abs() < 1e-9);
}

#[test]
fn flat_potential_rates_are_uniform() {
    let Model::Diffusion(m) = builtin_model("entropic-barriers").unwrap() else { panic!() };
    let gen = m.generator().unwrap();
    let spec = Model::Diffusion(m.clone()).reactant_product(gen.space()).unwrap();
    for i in 0..gen.len() {
        if spec.in_reactant(i) || spec.in_product(i) {
            continue;
        }
        for (j, r) in gen.out(i) {
            if !spec.in_reactant(j) && !spec.in_product(j) {
                assert!((r - 50.0).abs() < 1e-9);
                assert_eq!(gen.rate(j, i), r);
            }
        }
    }
}

#[test]
fn walls_block_crossings() {
    let Model::Diffusion(m) = builtin_model("entropic-barriers").unwrap() else { panic!() };
    let gen = m.generator().unwrap();
    let s = gen.space();
    for i in 0..gen.len() {
        let a = s.coords(i);
        for (j, _) in gen.out(i) {
            let b = s.coords(j);
            assert!(!m.walls.iter().any(|w| w.blocks([a[0], a[1]], [b[0], b[1]])));
        }
    }
    let below = s.locate(&[0.0, 0.3]).unwrap();
    let above = s.locate(&[0.0, 0.5]);
    assert!(above.is_some());
    assert!(s.locate(&[0.0, 0.4]).is_none(), "wall nodes are removed");
    assert_eq!(gen.out(below).filter(|&(j, _)| s.coords(j)[1] > 0.35).count(), 0);
}

#[test]
fn double_well_stationary_is_mirror_symmetric() {
    for eps in [0.01, 1.0] {
        let gen = BuiltinModel::DoubleWell.build(&BuiltinOptions { epsilon: Some(eps), ..Default::default() }).unwrap().generator().unwrap();
        let pi = stationary_distribution(&gen).unwrap();
        let s = gen.space();
        for i in 0..gen.len() {
            let c = s.coords(i);
            let m = s.locate(&[-c[0], c[1]]).unwrap();
            assert!((pi[i] - pi[m]).abs() <= 1e-8, "{c:?}");
        }
    }
}

#[test]
fn toggle_reversal_keeps_stationary_distribution() {
    let gen = builtin_model("toggle3d").unwrap().generator().unwrap();
    let pi = stationary_distribution(&gen).unwrap();
    let rev = reversed_generator(&gen, &pi).unwrap();
    let pi2 = stationary_distribution(&rev).unwrap();
    let err = (0..gen.len()).map(|i| (pi[i] - pi2[i]).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-10, "{err}");
}

type Formula = fn(&[f64]) -> f64;

fn check_formulas(model: BuiltinModel, formulas: &[(&str, Formula)]) {
    let net = network(model);
    let gen: Generator = net.generator().unwrap();
    let mut rng = rng(137);
    for _ in 0..100 {
        let x = gen.space().coords(rng.random_range(0..gen.len()));
        for (name, f) in formulas {
            let r = net.reactions.iter().find(|r| r.name == *name).unwrap();
            let (a, b) = (r.propensity(&x), f(&x));
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{model} {name} at {x:?}: {a} vs {b}");
        }
    }
}

#[test]
fn toggle_propensities_match_formulas() {
    check_formulas(
        BuiltinModel::Toggle3d,
        &[
            ("alpha1", |x| 2112.5 / ((65.0 + x[1] * x[1]) * (65.0 + x[2] * x[2]))),
            ("alpha2", |x| 845.0 / ((65.0 + x[0] * x[0]) * (65.0 + x[2] * x[2]))),
            ("alpha3", |x| 4225.0 / ((65.0 + x[0] * x[0]) * (65.0 + x[1] * x[1]))),
            ("alpha4", |x| 0.0125 * x[0]),
            ("alpha5", |x| 0.005 * x[1]),
            ("alpha6", |x| 0.025 * x[2]),
        ],
    );
    let net = network(BuiltinModel::Toggle3d);
    let a4 = net.reactions.iter().find(|r| r.name == "alpha4").unwrap();
    assert!((a4.propensity(&[40.0, 2.0, 2.0]) - 0.5).abs() < 1e-15);
}

#[test]
fn virus_propensities_match_formulas() {
    check_formulas(
        BuiltinModel::Virus,
        &[
            ("k1", |x| 0.25 * x[1]),
            ("k2", |x| 0.25 * x[0]),
            ("k3", |x| x[0]),
            ("k4", |x| 7.5e-6 * x[1] * x[2]),
            ("k5", |x| 1000.0 * x[0]),
            ("k6", |x| 1.99 * x[2]),
        ],
    );
    let net = network(BuiltinModel::Virus);
    let k5 = net.reactions.iter().find(|r| r.name == "k5").unwrap();
    assert_eq!(k5.propensity(&[30.0, 100.0, 12000.0]), 30000.0);
}

#[test]
fn sigma32_propensities_match_formulas() {
    check_formulas(
        BuiltinModel::Sigma32,
        &[
            ("k1", |x| 7.4e-11 * x[0]),
            ("k2", |x| 4.41e6 * x[5]),
            ("k3", |x| 1.80e-8 * x[1]),
            ("k4", |x| 5.69e6 * x[5]),
            ("k5", |x| 3.27e5 * x[2] * x[3]),
            ("k6", |x| 4.4e-4 * x[6]),
            ("k7", |x| 1.28e3 * x[6]),
            ("k8", |_| 0.007),
            ("k9", |x| 0.7 * x[4] * x[2]),
            ("k10", |x| 0.13 * x[5]),
        ],
    );
}

#[test]
fn truncation_faces_are_reflecting() {
    let net = network(BuiltinModel::Toggle3d);
    let gen = net.generator().unwrap();
    let s = gen.space();
    let top = s.locate(&[45.0, 0.0, 0.0]).unwrap();
    assert!(gen.out(top).all(|(j, _)| s.coords(j)[0] <= 45.0));
    assert_eq!(gen.out(top).filter(|&(j, _)| s.coords(j)[0] > 45.0 - 1e-9).count(), 2);
}

#[test]
fn defaults_and_errors() {
    let Model::Diffusion(m) = builtin_model("double-well").unwrap() else { panic!() };
    assert_eq!(m.potential, Potential::DoubleWell { epsilon: 0.01 });
    let virus = builtin_model("virus").unwrap();
    assert_eq!(virus.reactant(), Region::Point(vec![0.0, 0.0, 0.0]));
    assert!(matches!(builtin_model("lorenz"), Err(Error::UnknownModel(_))));
    assert!(matches!(builtin_model("sigma32"), Err(Error::MissingModelField { .. })));
    let toggle = builtin_model("toggle3d").unwrap().generator().unwrap();
    assert_eq!(toggle.len(), 16 * 16 * 16);
}

#[test]
fn file_model_round_trip() {
    let text = r#"
species = ["x"]
reactant = { point = [0] }
product = { point = [4] }
[constants]
b = 2.0
[[axes]]
min = 0
max = 4
step = 1
[[reactions]]
name = "birth"
change = [1]
propensity = "b"
[[reactions]]
name = "death"
change = [-1]
propensity = "x"
"#;
    let net = parse_model_file(text).unwrap();
    let gen = net.generator().unwrap();
    assert_eq!(gen.len(), 5);
    assert_eq!(gen.rate(2, 3), 2.0);
    assert_eq!(gen.rate(3, 2), 3.0);
    assert_eq!(gen.exit_rate(4), 4.0);
}
