use maxmin_lab::analysis::{competitive_report, prefix_stats};
use maxmin_lab::instances::{
    gen_binomial_public_private, gen_public_private, instance_from_json, instance_to_json,
    make_order, OrderModel,
};
use maxmin_lab::oracles::{opt_fractional_lp, opt_public_private_closed_form, opt_unit_flow};
use maxmin_lab::policies::{randomized_round, run_online, Mode, PolicyConfig};
use maxmin_lab::{Decisions, OptKind};

#[test]
fn generate_run_round_and_compare() {
    let inst = gen_public_private(6, 40).unwrap();
    let back = instance_from_json(&instance_to_json(&inst)).unwrap();
    assert_eq!(back, inst);

    let order = make_order(&inst, &OrderModel::UniformRandom { seed: 3 }).unwrap();
    let trace = run_online(
        &inst,
        &order,
        &PolicyConfig::smooth_greedy(0.2, Mode::Fractional),
    )
    .unwrap();
    assert!(matches!(trace.assignments, Decisions::Fractional(_)));
    let replayed = trace.replay(&inst, &order).unwrap();
    for (a, b) in replayed.as_slice().iter().zip(trace.final_loads.as_slice()) {
        assert!((a - b).abs() < 1e-9);
    }

    let rounded = randomized_round(&inst, &order, &trace, 11).unwrap();
    assert_eq!(rounded.policy_tag, "sgwr-frac+round");
    assert_eq!(rounded.replay(&inst, &order).unwrap(), rounded.final_loads);

    let opt = opt_public_private_closed_form(6, 40).unwrap();
    let flow = opt_unit_flow(&inst, OptKind::Integral).unwrap();
    assert_eq!(opt.value, flow.value);
    flow.verify(&inst, 1e-9).unwrap();

    let rep = competitive_report(&trace, &opt);
    let ratio = rep.ratio.unwrap();
    assert!(ratio > 0.0 && ratio <= 1.0 + 1e-12);
    assert!((rep.additive_regret - (opt.value - trace.min_load)).abs() < 1e-12);
}

#[test]
fn prefix_of_public_first_order() {
    let inst = gen_public_private(4, 5).unwrap();
    let order = make_order(&inst, &OrderModel::PublicFirst).unwrap();
    let s = prefix_stats(&inst, &order, 0.25).unwrap();
    assert_eq!(s.prefix_len, 5);
    assert_eq!(s.public_count, 5);
    assert_eq!(s.missing_private_types, vec![0, 1, 2]);
}

#[test]
fn binomial_instances_have_fractional_opt_k() {
    for seed in 0..5 {
        let inst = gen_binomial_public_private(4, 6, 0.5, seed).unwrap();
        let lp = opt_fractional_lp(&inst).unwrap();
        let flow = opt_unit_flow(&inst, OptKind::Fractional).unwrap();
        assert!((lp.value - flow.value).abs() < 1e-7);
        assert!((lp.value - 6.0).abs() < 1e-7);
        lp.verify(&inst, 1e-9).unwrap();
    }
}
