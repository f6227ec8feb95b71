use evfabric_core::{CostModel, MachineConfig};
use evfabric_matmul::plan::plan_tiling;
use evfabric_matmul::{audit, run_matmul, Command, MatmulError, MatmulOptions, MatmulRun, Matrix};
use evfabric_oracles::matmul::naive_i8;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(a: &Matrix<i8>, b: &Matrix<i8>, tiles: [usize; 3], workers: usize) -> MatmulRun {
    let plan = plan_tiling(a.rows, a.cols, b.cols, tiles[0], tiles[1], tiles[2], workers).unwrap();
    run_matmul(
        a,
        b,
        &plan,
        &MachineConfig::default(),
        &MatmulOptions::default(),
        &CostModel::default(),
    )
    .unwrap()
}

fn check_protocol(r: &MatmulRun) {
    assert!(r.all_terminated);
    assert_eq!(r.pending_combines, 0);
    let s = audit(r).unwrap();
    assert_eq!(s.command_irqs, r.commands.len());
    let g = r.plan.groups.len();
    let tree: usize = r.plan.groups.iter().map(|g| g.tree.len()).sum();
    assert_eq!(s.worker_to_worker_bytes, (tree * r.plan.c_tile_bytes()) as u64);
    assert_eq!(s.worker_to_dram_bytes, (g * r.plan.c_tile_bytes()) as u64);
}

#[test]
fn identity_times_b_is_b_widened() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = Matrix::random(12, 7, &mut rng);
    let r = run(&Matrix::identity(12), &b, [8, 8, 8], 3);
    assert_eq!(r.c, b.widen());
    check_protocol(&r);
}

#[test]
fn zero_operand_gives_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = Matrix::random(9, 16, &mut rng);
    let z = Matrix::<i8>::zeros(16, 5);
    assert_eq!(run(&a, &z, [8, 8, 8], 2).c, Matrix::zeros(9, 5));
    let z = Matrix::<i8>::zeros(9, 16);
    let b = Matrix::random(16, 5, &mut rng);
    assert_eq!(run(&z, &b, [8, 8, 8], 2).c, Matrix::zeros(9, 5));
}

#[test]
fn extreme_values_do_not_saturate() {
    let a = Matrix::from_vec(1, 64, vec![-128i8; 64]).unwrap();
    let b = Matrix::from_vec(64, 1, vec![-128i8; 64]).unwrap();
    let r = run(&a, &b, [8, 8, 8], 4);
    assert_eq!(r.c.data, vec![64 * 16384]);
    check_protocol(&r);
}

#[test]
fn random_shapes_match_naive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let (m, k, n) = (rng.random_range(1..=64), rng.random_range(1..=64), rng.random_range(1..=64));
        let tiles = [8, 16, 32];
        let t = [0, 0, 0].map(|_: i32| tiles[rng.random_range(0..3)]);
        let w = rng.random_range(1..=16);
        let a = Matrix::random(m, k, &mut rng);
        let b = Matrix::random(k, n, &mut rng);
        let r = run(&a, &b, t, w);
        assert_eq!(r.c.data, naive_i8(&a.data, &b.data, m, k, n), "{m}x{k}x{n} tiles {t:?} w={w}");
        check_protocol(&r);
    }
}

#[test]
fn single_worker_reduces_a_long_group() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = Matrix::random(8, 64, &mut rng);
    let b = Matrix::random(64, 16, &mut rng);
    let r = run(&a, &b, [8, 8, 8], 1);
    assert_eq!(r.c.data, naive_i8(&a.data, &b.data, 8, 64, 16));
    check_protocol(&r);
}

#[test]
fn run_issues_planned_combines_once_each() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = Matrix::random(4, 8, &mut rng);
    let b = Matrix::random(8, 4, &mut rng);
    let r = run(&a, &b, [2, 2, 2], 5);
    let mut got: Vec<(usize, usize)> = r
        .commands
        .iter()
        .filter_map(|(_, c)| match *c {
            Command::Accumulate { task, partner, .. } => Some((task, partner)),
            _ => None,
        })
        .collect();
    let mut planned: Vec<(usize, usize)> = r
        .plan
        .groups
        .iter()
        .flat_map(|g| g.tree.iter().map(|s| (s.accumulator, s.partner)))
        .collect();
    got.sort();
    planned.sort();
    assert_eq!(got.len(), 4 * 3);
    assert_eq!(got, planned);
    let counts = r.command_counts();
    assert_eq!(counts["load"], 16);
    assert_eq!(counts["multiply"], 16);
    assert_eq!(counts["writeback"], 4);
    assert_eq!(counts["terminate"], 16);
    // Commands go out in nondecreasing time.
    assert!(r.commands.windows(2).all(|w| w[0].0 <= w[1].0));
}

#[test]
fn reruns_are_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = Matrix::random(20, 30, &mut rng);
    let b = Matrix::random(30, 10, &mut rng);
    let r1 = run(&a, &b, [8, 8, 8], 6);
    let r2 = run(&a, &b, [8, 8, 8], 6);
    assert_eq!(r1.c, r2.c);
    assert_eq!(r1.comm, r2.comm);
    assert_eq!(r1.energy, r2.energy);
    assert_eq!(r1.report().unwrap(), r2.report().unwrap());
}

#[test]
fn report_counts_macs_and_bytes() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = Matrix::random(16, 16, &mut rng);
    let b = Matrix::random(16, 16, &mut rng);
    let r = run(&a, &b, [8, 8, 8], 4);
    let rep = r.report().unwrap();
    assert_eq!(rep.tasks, 8);
    assert_eq!(r.energy.counts["mac"], 8 * 512);
    assert_eq!(rep.audit.dram_to_worker_bytes, 8 * (64 + 64));
    assert_eq!(rep.audit.flag_bytes, rep.audit.flag_writes as u64 * 8);
    assert_eq!(rep.energy_total, r.energy.total());
}

#[test]
fn mismatched_operands_are_rejected() {
    let a = Matrix::<i8>::zeros(4, 5);
    let b = Matrix::<i8>::zeros(6, 4);
    let plan = plan_tiling(4, 5, 4, 2, 2, 2, 1).unwrap();
    let e = run_matmul(&a, &b, &plan, &MachineConfig::default(), &MatmulOptions::default(), &CostModel::default());
    assert!(matches!(e, Err(MatmulError::InvalidDims(_))));
}

#[test]
fn too_many_workers_for_the_machine() {
    let a = Matrix::<i8>::zeros(4, 4);
    let plan = plan_tiling(4, 4, 4, 2, 2, 2, 4).unwrap();
    let cfg = MachineConfig { cores_per_chip: 4, ..MachineConfig::default() };
    let e = run_matmul(&a, &a, &plan, &cfg, &MatmulOptions::default(), &CostModel::default());
    assert!(matches!(e, Err(MatmulError::InvalidDims(_))));
}
