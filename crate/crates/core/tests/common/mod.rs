#![allow(dead_code)]

use ppp_core::limits::{
    cp_fix_and_limits, dr_fix_and_limits, mt_fix_and_projection, ryu_fix_and_projection, FixSets,
};
use ppp_core::linalg::{Matrix, Subspace, Vector};
use ppp_core::methods::{build_cp, build_dr, build_mt, build_ryu, MethodFamily};
use ppp_core::monotone::ResolventOp;
use ppp_core::ppp::PppInstance;
use ppp_core::sampling::{random_matrix_with_norm, random_subspace, random_vector, rng, uniform, uniform_int, SeededRng};

/// A subspace instance together with its closed-form limit map.
pub struct Case {
    pub family: MethodFamily,
    pub inst: PppInstance,
    pub fix: FixSets,
    limit: Box<dyn Fn(&Vector) -> Vector>,
}

impl Case {
    /// Closed-form `M`-projection of `u0` onto `Fix T`.
    pub fn closed_limit(&self, u0: &Vector) -> Vector {
        (self.limit)(u0)
    }

    pub fn random_start(&self, rng: &mut SeededRng) -> Vector {
        random_vector(rng, self.inst.dim_h())
    }
}

fn cone(s: &Subspace) -> ResolventOp {
    ResolventOp::normal_cone(s.clone())
}

fn proper_subspace(rng: &mut SeededRng, d: usize) -> Subspace {
    let k = uniform_int(rng, 1, d - 1);
    random_subspace(rng, d, k)
}

pub fn dr_case(seed: u64, d: usize) -> Case {
    let mut r = rng(seed);
    let (u1, u2) = (proper_subspace(&mut r, d), proper_subspace(&mut r, d));
    let inst = build_dr(cone(&u1), cone(&u2)).unwrap();
    let fix = dr_fix_and_limits(&u1, &u2, &Vector::zeros(2 * d)).unwrap().0;
    Case {
        family: MethodFamily::DouglasRachford,
        inst,
        fix,
        limit: Box::new(move |u0| dr_fix_and_limits(&u1, &u2, u0).unwrap().1.u_star),
    }
}

/// Parameters of a random Chambolle–Pock instance.
pub struct CpParams {
    pub u: Subspace,
    pub v: Subspace,
    pub l: Matrix,
    pub sigma: f64,
    pub tau: f64,
}

pub fn cp_params(seed: u64, n: usize, m: usize) -> CpParams {
    let mut r = rng(seed);
    let u = proper_subspace(&mut r, n);
    let v = proper_subspace(&mut r, m);
    let norm = uniform(&mut r, 0.5, 2.0);
    let l = random_matrix_with_norm(&mut r, m, n, norm);
    let norm2 = ppp_core::linalg::operator_norm(&l).powi(2);
    let sigma = uniform(&mut r, 0.2, 2.0);
    let tau = uniform(&mut r, 0.3, 0.95) / (sigma * norm2);
    CpParams { u, v, l, sigma, tau }
}

pub fn cp_case(seed: u64, n: usize, m: usize) -> Case {
    let p = cp_params(seed, n, m);
    cp_case_from(p)
}

pub fn cp_case_from(p: CpParams) -> Case {
    let (n, m) = (p.l.ncols(), p.l.nrows());
    let inst = build_cp(cone(&p.u), cone(&p.v), p.l.clone(), p.sigma, p.tau).unwrap();
    let fix = cp_fix_and_limits(&p.u, &p.v, &p.l, p.sigma, p.tau, &Vector::zeros(n + m))
        .unwrap()
        .0;
    Case {
        family: MethodFamily::ChambollePock,
        inst,
        fix,
        limit: Box::new(move |u0| {
            cp_fix_and_limits(&p.u, &p.v, &p.l, p.sigma, p.tau, u0).unwrap().1.u_star
        }),
    }
}

pub fn ryu_case(seed: u64, d: usize) -> Case {
    let mut r = rng(seed);
    let ops: Vec<Subspace> = (0..3).map(|_| proper_subspace(&mut r, d)).collect();
    let inst = build_ryu(cone(&ops[0]), cone(&ops[1]), cone(&ops[2])).unwrap();
    let fix = ryu_fix_and_projection(&ops[0], &ops[1], &ops[2], &Vector::zeros(5 * d))
        .unwrap()
        .0;
    Case {
        family: MethodFamily::Ryu,
        inst,
        fix,
        limit: Box::new(move |u0| ryu_fix_and_projection(&ops[0], &ops[1], &ops[2], u0).unwrap().1),
    }
}

pub fn mt_case(seed: u64, n: usize, d: usize) -> Case {
    let mut r = rng(seed);
    let ops: Vec<Subspace> = (0..n).map(|_| proper_subspace(&mut r, d)).collect();
    let inst = build_mt(ops.iter().map(cone).collect()).unwrap();
    let fix = mt_fix_and_projection(&ops, &Vector::zeros((2 * n - 1) * d)).unwrap().0;
    Case {
        family: MethodFamily::MalitskyTam,
        inst,
        fix,
        limit: Box::new(move |u0| mt_fix_and_projection(&ops, u0).unwrap().1),
    }
}

/// One small instance of every family, drawn from `seed`.
pub fn mixed_cases(seed: u64) -> Vec<Case> {
    let mut r = rng(seed);
    let d = uniform_int(&mut r, 2, 5);
    let (n, m) = (uniform_int(&mut r, 2, 5), uniform_int(&mut r, 2, 5));
    let k = uniform_int(&mut r, 3, 5);
    vec![
        dr_case(seed ^ 0x11, d),
        cp_case(seed ^ 0x22, n, m),
        ryu_case(seed ^ 0x33, d),
        mt_case(seed ^ 0x44, k, d),
    ]
}
