mod common;

use common::{program_from_choices, random_inputs, tv_distance, Choice};
use mbqc::corpus;
use mbqc::ir::{Basis, Command, Program};
use mbqc::kernel::StateVector;
use mbqc::rewrite::desugar;
use mbqc::rng::substream;
use mbqc::simulator::{
    empirical_distribution, init, step_weak, strong_simulate, weak_simulate, InputAssignment, SimOptions,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn opts() -> SimOptions {
    SimOptions::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn strong_result_is_a_valid_state(n in 1usize..=5, mask in any::<u8>(), ops in prop::collection::vec(any::<Choice>(), 0..24), seed in any::<u64>()) {
        let p = program_from_choices(n, mask, &ops, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = random_inputs(&mut rng, &p);
        let r = strong_simulate(&p, &inputs, &opts()).unwrap();
        prop_assert!((r.density.trace() - 1.0).abs() < 1e-9);
        prop_assert!(r.density.is_hermitian(1e-9));
        for _ in 0..5 {
            let amps = (0..r.density.dim()).map(|_| mbqc::C64::new(rand::Rng::random_range(&mut rng, -1.0..1.0), rand::Rng::random_range(&mut rng, -1.0..1.0))).collect();
            let v = StateVector::from_amplitudes(amps).unwrap();
            prop_assert!(r.density.quadratic_form(&v).re > -1e-9);
        }
        if !p.readout_qubits().is_empty() {
            prop_assert!((r.readout_dist.values().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let spaces = p.spaces();
        let expect: Vec<usize> = spaces.outputs.difference(&p.readout_qubits()).copied().collect();
        prop_assert_eq!(r.order, expect);
    }

    #[test]
    fn weak_steps_stay_normalized(n in 1usize..=5, mask in any::<u8>(), ops in prop::collection::vec(any::<Choice>(), 0..24), seed in any::<u64>()) {
        let p = desugar(&program_from_choices(n, mask, &ops, 12));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = random_inputs(&mut rng, &p);
        let mut state = init(&p, &inputs, &opts()).unwrap();
        let mut stream = substream(seed, 0);
        for cmd in p.iter().filter(|c| !c.is_declaration()) {
            step_weak(&mut state, cmd, &mut stream).unwrap();
            prop_assert!((state.vector.norm_sqr() - 1.0).abs() < 1e-9);
            prop_assert_eq!(state.vector.n_qubits(), state.order.len());
        }
        let again = weak_simulate(&p, &inputs, seed, &opts()).unwrap();
        prop_assert_eq!(again.state, state.vector);
    }
}

#[test]
fn born_rule_on_plus() {
    let p = Program::new(vec![Command::Prep(0), Command::readout(0, Basis::Z)]);
    let zeros = (0..10_000u64)
        .filter(|s| {
            weak_simulate::<f64>(&p, &InputAssignment::new(), *s, &opts())
                .unwrap()
                .readouts[&0]
                == 0
        })
        .count();
    assert!((zeros as f64 / 10_000.0 - 0.5).abs() < 0.02);
}

#[test]
fn teleport_basis_state() {
    let p = corpus::teleport_program();
    let inputs: InputAssignment = [(0, mbqc::kernel::ket_zero())].into_iter().collect();
    let r = strong_simulate(&p, &inputs, &opts()).unwrap();
    assert!((r.density.get(0, 0).re - 1.0).abs() < 1e-9);
    assert_eq!(r.order, vec![2]);
}

#[test]
fn weak_matches_strong_on_corpus() {
    for e in corpus::corpus()
        .into_iter()
        .filter(|e| !e.program.readout_qubits().is_empty())
    {
        let strong = strong_simulate(&e.program, &e.inputs, &opts()).unwrap();
        let weak = empirical_distribution(&e.program, &e.inputs, 3000, 17, &opts()).unwrap();
        assert!(tv_distance(&strong.readout_dist, &weak) < 0.05, "{}", e.name);
    }
}

#[test]
fn empirical_is_reproducible() {
    let p = corpus::grover2([0, 1], corpus::GroverVariant::Six);
    let a = empirical_distribution::<f64>(&p, &InputAssignment::new(), 500, 9, &opts()).unwrap();
    let b = empirical_distribution::<f64>(&p, &InputAssignment::new(), 500, 9, &opts()).unwrap();
    assert_eq!(a, b);
}
