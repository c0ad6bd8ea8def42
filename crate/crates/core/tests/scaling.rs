//! Gate-count scaling behaviour of the two lowering strategies, plus
//! correctness of the per-rotation (unmerged) emission path.

use povmc::compiler::CompileOptions;
use povmc::numerics::C64;
use povmc::*;

fn plan_for(n: usize, seed: u64) -> SynthesisPlan {
    extract_modules(&random_povm(n, seed)).unwrap()
}

#[test]
fn exponential_total_cnots_quadruple_per_doubling() {
    let count = |n: usize| {
        compile(&plan_for(n, 1234 + n as u64), LoweringMode::Exponential)
            .unwrap()
            .cost()
            .cnot_count
    };
    let (c16, c32, c64) = (count(16), count(32), count(64));
    for ratio in [c32 as f64 / c16 as f64, c64 as f64 / c32 as f64] {
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn linear_per_module_cnots_grow_at_most_logarithmically() {
    for options in [
        CompileOptions::new(LoweringMode::Linear),
        CompileOptions::per_rotation(LoweringMode::Linear),
    ] {
        let circuit = compile_with(&plan_for(64, 999), &options).unwrap();
        let per_module = circuit.cost().per_module_cnots;
        for i in [8usize, 16] {
            let ratio = per_module[2 * i] as f64 / per_module[i] as f64;
            assert!(ratio <= 1.6, "module {} / module {} ratio {ratio}", 2 * i, i);
        }
    }
}

#[test]
fn exponential_per_module_cnots_track_the_recursion() {
    // T(m) = 2 T(m-1) + 2 per extra control; modules at the same control
    // width must cost the same order, and doubling the module index adds
    // one control.
    let circuit = compile(&plan_for(32, 77), LoweringMode::Exponential).unwrap();
    let per_module = circuit.cost().per_module_cnots;
    let ratio = per_module[16] as f64 / per_module[8] as f64;
    assert!(ratio > 1.5 && ratio < 2.5, "ratio {ratio}");
}

#[test]
fn per_rotation_lowering_is_also_correct() {
    // The unmerged path must satisfy the same dilation contract as the
    // default one.
    for case in 0..20u64 {
        let n = 2 + (case as usize) % 7;
        let povm = random_povm(n, 40_000 + case);
        let plan = extract_modules(&povm).unwrap();
        for mode in [LoweringMode::Exponential, LoweringMode::Linear] {
            let circuit = compile_with(&plan, &CompileOptions::per_rotation(mode)).unwrap();
            for rep in 0..3u64 {
                let u = random_unitary(2, 70_000 + case * 3 + rep);
                let psi = Qubit1State::new(u.at(0, 0), u.at(1, 0)).unwrap();
                let state = run(&circuit, &psi).unwrap();
                let expected = dilation_state(&povm, &psi);
                let reference = expected
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                    .map(|(i, _)| i)
                    .unwrap();
                let rotation = C64::from_polar(
                    1.0,
                    -(state.amplitudes()[reference] / expected[reference]).arg(),
                );
                for (i, amp) in state.amplitudes().iter().enumerate() {
                    let e = expected.get(i).copied().unwrap_or(C64::ZERO);
                    assert!(
                        (amp * rotation - e).norm() < 1e-9,
                        "case {case} mode {mode:?} rep {rep}"
                    );
                }
            }
        }
    }
}

#[test]
fn cost_totals_survive_qasm_re_emission() {
    for (n, seed) in [(3usize, 5u64), (6, 11)] {
        let circuit = compile(&plan_for(n, seed), LoweringMode::Linear).unwrap();
        let report = circuit.cost();
        let text = circuit.to_qasm();
        let recount = |prefix: &str| text.lines().filter(|l| l.starts_with(prefix)).count();
        assert_eq!(recount("cx "), report.cnot_count);
        assert_eq!(recount("ry(") + recount("rz("), report.rotation_count);
        assert_eq!(recount("x "), report.x_count);
    }
}
