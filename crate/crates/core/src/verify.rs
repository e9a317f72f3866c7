//! Named verification suites: each acceptance criterion as a reproducible
//! check with per-item values, thresholds and pass/fail state.
//!
//! Items marked `enforced = false` are measurements carried for the record
//! (they correspond to statements the project notes document as defective
//! or convention-bound); a criterion passes when every enforced item does.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::fock::{pfaffian, reference, AntisymmetricMatrix};
use crate::lattice::{build_dual_interval, build_hex_domain, build_square_domain, IntervalKind};
use crate::observables::fermion::{epsilon_identities, FermionKind, FermionStrip, Insertion};
use crate::observables::{
    dressed_observable_field, loop_observable_field, low_temp_observables, morera_max_residual,
    smirnov_vertex_residual, StartDir,
};
use crate::oracle::{AtOracle, IsingOracle, RcOracle, RcBc, SpinBc};
use crate::propagate::{
    build_propagator, row_coefficients, spectrum, BoundaryReading, RowPosition,
    SPECTRUM_TOLERANCE,
};
use crate::rps::{extend_kernel, rps_operator, RpsBackend};
use crate::sholo::{make_relations, sholo_residuals, HoloParams, Model, Regime};
use crate::transfer::{
    at_dual, at_duality_residuals, build_at_transfer, build_ising_transfer, build_loop_transfer,
    clifford_generators, flip_even_spectrum, induced_rotation, ising_dual, LinkPattern, SideBc,
    SpinBasis,
};
use crate::{lambda, Result, C64};

/// One measured check item.
#[derive(Clone, Debug, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Enforced items gate the criterion; unenforced ones are recorded
    /// measurements (see the project notes for why).
    pub enforced: bool,
}

impl CheckItem {
    fn enforced(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        CheckItem {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
            enforced: true,
        }
    }

    fn reported(name: impl Into<String>, value: f64) -> Self {
        CheckItem {
            name: name.into(),
            value,
            threshold: f64::INFINITY,
            passed: true,
            enforced: false,
        }
    }

    /// An enforced item asserting a condition rather than a bound.
    fn flag(name: impl Into<String>, ok: bool) -> Self {
        CheckItem {
            name: name.into(),
            value: if ok { 0.0 } else { 1.0 },
            threshold: 0.5,
            passed: ok,
            enforced: true,
        }
    }
}

/// Result of one acceptance criterion.
#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub number: usize,
    pub name: &'static str,
    pub items: Vec<CheckItem>,
    pub passed: bool,
}

impl CriterionReport {
    fn new(number: usize, name: &'static str, items: Vec<CheckItem>) -> Self {
        let passed = items.iter().filter(|i| i.enforced).all(|i| i.passed);
        CriterionReport {
            number,
            name,
            items,
            passed,
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:2} [{}] {}: {}",
            self.number,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.items
                .iter()
                .map(|i| {
                    format!(
                        "{}={:.3e}{}",
                        i.name,
                        i.value,
                        if !i.enforced {
                            " (reported)"
                        } else if i.passed {
                            ""
                        } else {
                            " (FAILED)"
                        }
                    )
                })
                .collect::<Vec<_>>()
                .join("; ")
        )
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Criterion 1: propagator rows reproduce the displayed coefficients,
/// against independently hand-coded literals.
pub fn criterion_1() -> Result<CriterionReport> {
    let mut items = Vec::new();
    let r2 = 1.0 / 2f64.sqrt();
    let r3 = 1.0 / 3f64.sqrt();
    let lam = lambda();
    let l3 = lam.powi(3);
    let l2 = lam.powi(2);
    let mut worst = 0.0f64;
    // Hand-coded (offset, linear, antilinear) triples per row position.
    struct Case {
        model: Model,
        regime: Regime,
        coupling: f64,
        position: RowPosition,
        linear: Vec<(i64, C64)>,
        antilinear: Vec<(i64, C64)>,
    }
    let beta = 0.37f64;
    let (sh, ch) = ((2.0 * beta).sinh(), (2.0 * beta).cosh());
    let s2 = 2.0 * sh;
    let x_loop = 0.45f64;
    let bl = 0.5 * x_loop.ln().abs();
    let (shl, chl) = ((2.0 * bl).sinh(), (2.0 * bl).cosh());
    let s2l = 2.0 * shl;
    let zz = |sh: f64, ch: f64| c(-(sh + ch) * sh / (2.0 * sh), (ch - sh) / (2.0 * sh));
    let cases = vec![
        Case {
            model: Model::Ising,
            regime: Regime::Critical,
            coupling: 0.0,
            position: RowPosition::Bulk,
            linear: vec![(-1, l3.conj() * r2), (0, c(2.0, 0.0)), (1, l3 * r2)],
            antilinear: vec![(-1, c(r2, 0.0)), (0, c(-2f64.sqrt(), 0.0)), (1, c(r2, 0.0))],
        },
        Case {
            model: Model::At,
            regime: Regime::Critical,
            coupling: 0.0,
            position: RowPosition::Left,
            linear: vec![(0, c(1.0 + r2, 0.0)), (1, l3 * r2)],
            antilinear: vec![(0, l3 + l3.conj() * r2), (1, c(r2, 0.0))],
        },
        Case {
            model: Model::At,
            regime: Regime::Critical,
            coupling: 0.0,
            position: RowPosition::Right,
            linear: vec![(-1, l3.conj() * r2), (0, c(1.0 + r2, 0.0))],
            antilinear: vec![(-1, c(r2, 0.0)), (0, l3.conj() + l3 * r2)],
        },
        Case {
            model: Model::Ising,
            regime: Regime::Subcritical,
            coupling: beta,
            position: RowPosition::Bulk,
            linear: vec![
                (-1, c(-sh / s2, -1.0 / s2)),
                (0, c(ch * ch / sh, 0.0)),
                (1, c(-sh / s2, 1.0 / s2)),
            ],
            antilinear: vec![
                (-1, c(ch / s2, 0.0)),
                (0, c(-ch, 0.0)),
                (1, c(ch / s2, 0.0)),
            ],
        },
        Case {
            model: Model::Ising,
            regime: Regime::Subcritical,
            coupling: beta,
            position: RowPosition::Left,
            linear: vec![(0, c((sh + ch) * ch / s2, 0.0)), (1, c(-sh / s2, 1.0 / s2))],
            antilinear: vec![(0, c(1.0, 0.0)), (1, c(ch / s2, 0.0))],
        },
        Case {
            model: Model::Ising,
            regime: Regime::Subcritical,
            coupling: beta,
            position: RowPosition::Right,
            linear: vec![(-1, c(-sh / s2, -1.0 / s2)), (0, c((sh + ch) * ch / s2, 0.0))],
            antilinear: vec![(-1, c(ch / s2, 0.0)), (0, zz(sh, ch))],
        },
        Case {
            model: Model::Loop,
            regime: Regime::Critical,
            coupling: 0.0,
            position: RowPosition::Bulk,
            linear: vec![(-1, l2.conj() * r3), (0, c(2.0, 0.0)), (1, l2 * r3)],
            antilinear: vec![(-1, c(r3, 0.0)), (0, c(-3f64.sqrt(), 0.0)), (1, c(r3, 0.0))],
        },
        Case {
            model: Model::Loop,
            regime: Regime::Critical,
            coupling: 0.0,
            position: RowPosition::Left,
            linear: vec![(0, c(1.0 + r3, 0.0)), (1, l2 * r3)],
            antilinear: vec![(0, l2 + l2.conj() * r3), (1, c(r3, 0.0))],
        },
        Case {
            // The printed k_R row carries lambda^-2 + lambda^3 / sqrt(3).
            model: Model::Loop,
            regime: Regime::Critical,
            coupling: 0.0,
            position: RowPosition::Right,
            linear: vec![(-1, l2.conj() * r3), (0, c(1.0 + r3, 0.0))],
            antilinear: vec![(-1, c(r3, 0.0)), (0, l2.conj() + l3 * r3)],
        },
        Case {
            model: Model::Loop,
            regime: Regime::Subcritical,
            coupling: x_loop,
            position: RowPosition::Left,
            linear: vec![
                (0, c((shl + chl) * chl / s2l, 0.0)),
                (1, c(-shl / s2l, 1.0 / s2l)),
            ],
            antilinear: vec![(0, zz(shl, chl)), (1, c(chl / s2l, 0.0))],
        },
    ];
    for case in &cases {
        let row = row_coefficients(
            case.model,
            case.regime,
            case.coupling,
            case.position,
            BoundaryReading::AsDisplayed,
        )?;
        for &(off, expected) in case.linear.iter() {
            let got = row
                .linear
                .iter()
                .find(|&&(o, v)| o == off && v.norm_sqr() > 0.0)
                .map(|&(_, v)| v)
                .unwrap_or(c(0.0, 0.0));
            worst = worst.max((got - expected).norm());
        }
        for &(off, expected) in case.antilinear.iter() {
            let got = row
                .antilinear
                .iter()
                .find(|&&(o, v)| o == off && v.norm_sqr() > 0.0)
                .map(|&(_, v)| v)
                .unwrap_or(c(0.0, 0.0));
            worst = worst.max((got - expected).norm());
        }
    }
    items.push(CheckItem::enforced(
        "row-literal max |diff|",
        worst,
        1e-14,
    ));
    // Row readback through realized matrices for n in 2..=6.
    let mut apply_worst = 0.0f64;
    for n in 2..=6usize {
        let interval = build_dual_interval(0, n as i64, IntervalKind::Dual)?;
        let p = build_propagator(Model::Ising, Regime::Subcritical, &interval, beta)?;
        let mut field = vec![c(0.0, 0.0); n];
        field[1] = c(1.0, 0.0);
        let out = p.apply(&field)?;
        // Row 0 sees f(k_L + 1) with coefficient (i - S)/(2S) + conj part.
        let expect = c(-sh / s2, 1.0 / s2) + c(ch / s2, 0.0);
        apply_worst = apply_worst.max((out[0] - expect).norm());
    }
    items.push(CheckItem::enforced(
        "realized-row readback max |diff|",
        apply_worst,
        1e-14,
    ));
    Ok(CriterionReport::new(1, "propagator fidelity", items))
}

/// Criterion 2: spectral properties of all six propagators, n in 2..=6.
pub fn criterion_2() -> Result<CriterionReport> {
    let mut items = Vec::new();
    let mut sym_worst = 0.0f64;
    let mut unit_gap_min = f64::INFINITY;
    let mut all_distinct = true;
    let mut family_min_above = f64::INFINITY;
    let mut split_ok = true;
    let mut min_modulus_overall = f64::INFINITY;
    for (model, regime, coupling, half_split) in [
        (Model::Ising, Regime::Critical, 0.0, true),
        (Model::Ising, Regime::Subcritical, 0.37, false),
        (Model::At, Regime::Critical, 0.0, true),
        (Model::At, Regime::Subcritical, crate::at_critical_coupling(), false),
        (Model::Loop, Regime::Critical, 0.0, false),
        (Model::Loop, Regime::Subcritical, 1.0 / 3f64.sqrt(), true),
    ] {
        for n in 2..=6usize {
            let interval = build_dual_interval(0, n as i64, IntervalKind::Dual)?;
            let p = build_propagator(model, regime, &interval, coupling)?;
            let rep = spectrum(&p, SPECTRUM_TOLERANCE)?;
            sym_worst = sym_worst.max(rep.symmetric_defect);
            unit_gap_min = unit_gap_min.min(rep.modulus_one_gap());
            all_distinct &= rep.distinct;
            min_modulus_overall = min_modulus_overall.min(rep.min_modulus);
            let above = rep.count_above_one();
            let expected = if half_split { n } else { n + 1 };
            split_ok &= above == expected;
            family_min_above = family_min_above.min(
                rep.eigenvalues
                    .iter()
                    .map(|&(re, im)| C64::new(re, im).norm())
                    .filter(|&m| m > 1.0)
                    .fold(f64::INFINITY, f64::min),
            );
        }
    }
    items.push(CheckItem::enforced("symmetry defect", sym_worst, 1e-10));
    items.push(CheckItem::flag("pairwise distinct @1e-8", all_distinct));
    items.push(CheckItem::enforced(
        "1/|gap to unit modulus| (>1e-8 gap)",
        1.0 / unit_gap_min,
        1e8,
    ));
    items.push(CheckItem::flag(
        "eigenvalue family split about modulus 1",
        split_ok,
    ));
    items.push(CheckItem::flag(
        "above-family magnitudes all > 1 (the indexed eigenvalue family)",
        family_min_above > 1.0,
    ));
    items.push(CheckItem::reported(
        "full-spectrum min modulus (spec paraphrase: > 1; see ledger)",
        min_modulus_overall,
    ));
    Ok(CriterionReport::new(2, "propagator spectra", items))
}

/// Criterion 3: Pfaffian suite.
pub fn criterion_3() -> Result<CriterionReport> {
    use ndarray_linalg::Determinant;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let mut items = Vec::new();
    let mut perm_worst = 0.0f64;
    for dim in [2usize, 4, 6, 8] {
        let a = AntisymmetricMatrix::from_upper(dim, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let fast = pfaffian(&a)?;
        let slow = reference::pfaffian_permutation_sum(&a)?;
        perm_worst = perm_worst.max((fast - slow).norm() / slow.norm().max(1e-30));
    }
    items.push(CheckItem::enforced(
        "Pf vs permutation sum (2m <= 8)",
        perm_worst,
        1e-12,
    ));
    let mut det_worst = 0.0f64;
    for dim in [4usize, 8, 12] {
        let a = AntisymmetricMatrix::from_upper(dim, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let pf = pfaffian(&a)?;
        let det = a
            .entries
            .det()
            .map_err(|e| crate::Error::Numerical(e.to_string()))?;
        det_worst = det_worst.max((pf * pf - det).norm() / det.norm().max(1e-30));
    }
    items.push(CheckItem::enforced("Pf^2 = det (2m <= 12)", det_worst, 1e-9));
    let mut cong_worst = 0.0f64;
    for dim in [4usize, 6] {
        let a = AntisymmetricMatrix::from_upper(dim, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let mut b = Array2::<C64>::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                b[[i, j]] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let bab = AntisymmetricMatrix::new(b.dot(&a.entries).dot(&b.t()))?;
        let lhs = pfaffian(&bab)?;
        let rhs = b
            .det()
            .map_err(|e| crate::Error::Numerical(e.to_string()))?
            * pfaffian(&a)?;
        cong_worst = cong_worst.max((lhs - rhs).norm() / rhs.norm().max(1e-30));
    }
    items.push(CheckItem::enforced(
        "Pf(B A B^T) = det(B) Pf(A)",
        cong_worst,
        1e-9,
    ));
    Ok(CriterionReport::new(3, "pfaffian suite", items))
}

/// Criterion 4: duality.
pub fn criterion_4() -> Result<CriterionReport> {
    use rand::{Rng, SeedableRng};
    let mut items = Vec::new();
    let bc = crate::beta_critical();
    items.push(CheckItem::enforced(
        "ising |beta* - beta_c| at beta_c",
        (ising_dual(bc)? - bc).abs(),
        1e-12,
    ));
    let cc = crate::at_critical_coupling();
    let (js, us) = at_dual(cc, cc)?;
    let (r1, r2) = at_duality_residuals(cc, cc, js, us);
    items.push(CheckItem::enforced(
        "AT fixed point |J*-J|+|U*-U|",
        (js - cc).abs() + (us - cc).abs(),
        1e-10,
    ));
    items.push(CheckItem::enforced("AT relations at fixed point", r1.max(r2), 1e-10));
    let mut rel_worst = 0.0f64;
    let mut invol_worst = 0.0f64;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let mut tried = 0;
    while tried < 25 {
        let j = rng.gen_range(0.1..0.9);
        let u = rng.gen_range(-0.3..0.5);
        let Ok((js, us)) = at_dual(j, u) else { continue };
        tried += 1;
        let (r1, r2) = at_duality_residuals(j, u, js, us);
        rel_worst = rel_worst.max(r1.max(r2));
        let (jb, ub) = at_dual(js, us)?;
        invol_worst = invol_worst.max((jb - j).abs().max((ub - u).abs()));
    }
    items.push(CheckItem::enforced(
        "AT relations on random couplings",
        rel_worst,
        1e-10,
    ));
    items.push(CheckItem::enforced("AT involution roundtrip", invol_worst, 1e-9));
    Ok(CriterionReport::new(4, "duality", items))
}

/// Criterion 5: transfer / partition correspondence.
pub fn criterion_5() -> Result<CriterionReport> {
    let mut items = Vec::new();
    let mut worst = 0.0f64;
    let beta = 0.33;
    for sites in 2..=4usize {
        for rows in 1..=4usize {
            let plus = build_ising_transfer(sites, beta, SideBc::Plus)?;
            let z = IsingOracle::new(sites, rows + 1, beta, SpinBc::Plus)?.partition();
            worst = worst.max((plus.partition_bracket(rows) - z).abs() / z);
            let free = build_ising_transfer(sites, beta, SideBc::Free)?;
            let z = IsingOracle::new(sites, rows + 1, beta, SpinBc::PlusTopBottom)?.partition();
            worst = worst.max((free.partition_bracket(rows) - z).abs() / z);
        }
    }
    items.push(CheckItem::enforced(
        "ising strips rel err (|I| <= 4, N <= 4, both side bcs)",
        worst,
        1e-8,
    ));
    let mut at_worst = 0.0f64;
    let (j, u) = (crate::at_critical_coupling(), crate::at_critical_coupling());
    for rows in 1..=3usize {
        let plus = build_at_transfer(2, j, u, SideBc::Plus)?;
        let z = AtOracle::new(2, rows + 1, j, u, SpinBc::Plus)?.partition();
        at_worst = at_worst.max((plus.partition_bracket(rows) - z).abs() / z);
        let free = build_at_transfer(2, j, u, SideBc::Free)?;
        let z = AtOracle::new(2, rows + 1, j, u, SpinBc::PlusTopBottom)?.partition();
        at_worst = at_worst.max((free.partition_bracket(rows) - z).abs() / z);
    }
    items.push(CheckItem::enforced(
        "AT strips rel err (|I| <= 2, N <= 3)",
        at_worst,
        1e-8,
    ));
    Ok(CriterionReport::new(5, "transfer partition correspondence", items))
}

/// Criterion 6: Ising <-> random-cluster coupling.
pub fn criterion_6() -> Result<CriterionReport> {
    let mut worst = 0.0f64;
    for beta in [0.2, crate::beta_critical(), 0.8] {
        let p = 1.0 - (-2.0 * beta).exp();
        for (w, h) in [(2usize, 2usize), (3, 2), (3, 3)] {
            let ising = IsingOracle::new(w, h, beta, SpinBc::Free)?;
            let rc = RcOracle::new(w, h, p, 2.0, RcBc::Free)?;
            for a in 1..w * h {
                let diff = (ising.correlation(0, a) - rc.connectivity(0, a)).abs();
                worst = worst.max(diff);
            }
        }
    }
    let items = vec![CheckItem::enforced(
        "E_free[s0 sa] vs phi0(0<->a), grids <= 3x3, beta in {0.2, beta_c, 0.8}",
        worst,
        1e-10,
    )];
    Ok(CriterionReport::new(6, "ising-random-cluster coupling", items))
}

/// Criterion 7: path-sum discrete holomorphicity.
pub fn criterion_7() -> Result<CriterionReport> {
    let mut items = Vec::new();
    // Square half: contour (Morera) identity of the dressed configuration
    // sum at beta_c; the literal four-relation residual is reported (it is
    // satisfied by no local path-sum observable; see the project notes).
    let g = build_square_domain(3, 2)?;
    let beta = crate::beta_critical();
    let a = g.edge_at(1, 0).unwrap();
    let mut morera_worst = 0.0f64;
    let mut relation_worst = 0.0f64;
    for dir in [StartDir::Low, StartDir::High] {
        let field = dressed_observable_field(&g, a, dir, beta)?;
        morera_worst = morera_worst.max(morera_max_residual(&g, &field, a)?);
        let rel = make_relations(&HoloParams::ising(Regime::Critical, beta))?;
        let rep = sholo_residuals(&g, &field, &rel, 1e-10)?;
        let off_a_max = rep
            .per_face
            .iter()
            .filter(|f| !g.faces[f.face].edges.contains(&a))
            .flat_map(|f| f.residuals.iter().copied())
            .fold(0.0f64, f64::max);
        relation_worst = relation_worst.max(off_a_max);
    }
    items.push(CheckItem::enforced(
        "ising contour identity off a (3x2, beta_c)",
        morera_worst,
        1e-10,
    ));
    items.push(CheckItem::reported(
        "literal four-relation residual (unattainable for path sums; ledger)",
        relation_worst,
    ));
    // Hex half: the three-edge vertex identity at x_c(0), sigma = 5/8.
    let hex = build_hex_domain(2, 1)?;
    let x = crate::loop_x_critical(0.0)?;
    let a_hex = hex.boundary[0];
    let field = loop_observable_field(&hex, a_hex, StartDir::Both, x, 0.625)?;
    let mut vertex_worst = 0.0f64;
    for v in 0..hex.n_vertices() {
        if hex.edges_of_vertex(v).len() == 3 {
            vertex_worst = vertex_worst.max(smirnov_vertex_residual(&hex, &field, v)?.norm());
        }
    }
    items.push(CheckItem::enforced(
        "loop vertex identity (2 hexagons, x_c(0), sigma 5/8)",
        vertex_worst,
        1e-10,
    ));
    Ok(CriterionReport::new(7, "path-sum holomorphicity", items))
}

/// Criterion 8: the two-point identity set on the |I| = 2, N = 3 strip.
pub fn criterion_8() -> Result<CriterionReport> {
    let mut items = Vec::new();
    let strip = FermionStrip::ising(2, 3, 0.4)?;
    let a = (0usize, 1usize);
    let z = (0usize, 2usize);
    let g = strip.two_point(z, FermionKind::Psi, a, FermionKind::Psi)?;
    let h = strip.two_point(z, FermionKind::Psi, a, FermionKind::PsiBar)?;
    let k = strip.two_point(z, FermionKind::PsiBar, a, FermionKind::PsiBar)?;
    // Solve the up/down pair from lines 1 and 2 (reading A); line 3 is then
    // the consistency identity k = -conj(g) in the strip's bar convention.
    let f_up = (h - g) / 2.0;
    let f_down = (g + h) / c(0.0, 2.0);
    items.push(CheckItem::flag(
        "line-1/2 solve well-posed (f_up, f_down finite)",
        f_up.norm().is_finite() && f_down.norm().is_finite(),
    ));
    items.push(CheckItem::enforced(
        "line-3 consistency |<psibar psibar> + conj(<psi psi>)|",
        (k + g.conj()).norm(),
        1e-8,
    ));
    // Both displayed readings of the ambiguous second line.
    let reading_a = (h - (f_up + c(0.0, 1.0) * f_down)).norm();
    let reading_b = (h - (-f_up.conj() - c(0.0, 1.0) * f_down.conj())).norm();
    items.push(CheckItem::enforced("line-2 reading A residual", reading_a, 1e-8));
    items.push(CheckItem::reported("line-2 reading B residual", reading_b));
    // Ratio stability in the strip height (the N-stability the notes ask
    // for): the solved f_up ratio between two z rows matches across N.
    let mut ratios = Vec::new();
    for rows in [3usize, 4, 5] {
        let strip = FermionStrip::ising(2, rows, 0.4)?;
        let g1 = strip.two_point((0, 2), FermionKind::Psi, a, FermionKind::Psi)?;
        let h1 = strip.two_point((0, 2), FermionKind::Psi, a, FermionKind::PsiBar)?;
        ratios.push(((h1 - g1) / 2.0).norm() / strip.vacuum_norm().powi(0));
    }
    items.push(CheckItem::reported(
        "solved f_up magnitude drift across N in {3,4,5}",
        (ratios[0] - ratios[2]).abs(),
    ));
    // Path-sum comparison (operational start-orientation split), reported:
    // the dressed walk sums with the documented convention.
    let grid = build_square_domain(1, 3)?;
    let a_edge = grid.edge_at(1, 2).unwrap();
    let z_edge = grid.edge_at(1, 4).unwrap();
    let alpha = (-2.0f64 * 0.4).exp();
    let (up_path, down_path) = low_temp_observables(&grid, a_edge, z_edge, alpha)?;
    items.push(CheckItem::reported(
        "path-sum |f_up| (operational split)",
        up_path.norm(),
    ));
    items.push(CheckItem::reported(
        "path-sum |f_down| (operational split)",
        down_path.norm(),
    ));
    items.push(CheckItem::reported("solved |f_up| (operator side)", f_up.norm()));
    items.push(CheckItem::reported(
        "solved |f_down| (operator side)",
        f_down.norm(),
    ));
    Ok(CriterionReport::new(8, "two-point identity set", items))
}

/// Criterion 9: multipoint Pfaffian factorization and the epsilon
/// identities, the second of which is arithmetically false as displayed
/// (|lambda - lambda^2| = 0.765...); it is enforced as stated and fails,
/// with the corrected lambda-coefficient form carried alongside.
pub fn criterion_9() -> Result<CriterionReport> {
    let mut items = Vec::new();
    let strip = FermionStrip::ising(2, 5, 0.4)?;
    let ins = [
        Insertion {
            x: 0,
            y: 4,
            kind: FermionKind::Psi,
        },
        Insertion {
            x: 0,
            y: 3,
            kind: FermionKind::PsiBar,
        },
        Insertion {
            x: 0,
            y: 2,
            kind: FermionKind::PsiUp,
        },
        Insertion {
            x: 0,
            y: 1,
            kind: FermionKind::PsiDown,
        },
    ];
    let rep = strip.multipoint(&ins)?;
    let direct = c(rep.direct.0, rep.direct.1);
    items.push(CheckItem::enforced(
        "4-point Pfaffian vs direct product rel err",
        rep.abs_diff / direct.norm().max(1e-30),
        1e-8,
    ));
    let eps = epsilon_identities();
    for (eta, id1, id2_displayed, id2_lambda) in eps.rows {
        items.push(CheckItem::enforced(
            format!("epsilon identity 1 at eta={eta}"),
            id1,
            1e-14,
        ));
        items.push(CheckItem::enforced(
            format!("epsilon identity 2 as displayed (lambda^2) at eta={eta}"),
            id2_displayed,
            1e-14,
        ));
        items.push(CheckItem::reported(
            format!("epsilon identity 2 with coefficient lambda at eta={eta}"),
            id2_lambda,
        ));
    }
    Ok(CriterionReport::new(9, "multipoint factorization", items))
}

/// Criterion 10: RPS operators and kernel extension.
pub fn criterion_10() -> Result<CriterionReport> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
    let mut items = Vec::new();
    let mut system_worst = 0.0f64;
    for (model, coupling) in [
        (Model::At, 0.4),
        (Model::Ising, 0.37),
        (Model::Loop, 1.0 / 3f64.sqrt()),
    ] {
        for n in 2..=4usize {
            for n_power in 1..=4usize {
                let interval = build_dual_interval(0, n as i64, IntervalKind::Dual)?;
                let op = rps_operator(
                    model,
                    Regime::Subcritical,
                    &interval,
                    coupling,
                    n_power,
                    RpsBackend::Displayed,
                )?;
                let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let v = op.matrix.dot(&Array1::from_vec(u.clone()));
                let mut x = Array1::<f64>::zeros(2 * n);
                for k in 0..n {
                    x[2 * k] = u[k];
                    x[2 * k + 1] = v[k];
                }
                let y = op.propagator.matrix.dot(&x);
                let scale = y.iter().fold(0.0f64, |m, &t| m.max(t.abs())).max(1.0);
                let im_max = (0..n).map(|k| y[2 * k + 1].abs()).fold(0.0f64, f64::max);
                system_worst = system_worst.max(im_max / scale);
            }
        }
    }
    items.push(CheckItem::enforced(
        "block formula solves [P^N][u;v]=[w;0] (n <= 4, N <= 4)",
        system_worst,
        1e-10,
    ));
    // Kernel extension on the relation transporter: interior relations and
    // side-wall Riemann compliance.
    let interval = build_dual_interval(0, 3, IntervalKind::Dual)?;
    let op = rps_operator(
        Model::At,
        Regime::Subcritical,
        &interval,
        0.4,
        2,
        RpsBackend::Transporter,
    )?;
    let mut interior_worst = 0.0f64;
    let mut side_worst = 0.0f64;
    let mut top_worst = 0.0f64;
    for y0 in 0..3usize {
        let mut u = vec![0.0; 3];
        u[y0] = 1.0;
        let ext = extend_kernel(&op, &u)?;
        interior_worst = interior_worst.max(ext.interior_relation_max);
        side_worst = side_worst.max(ext.side_wall_riemann_max);
        top_worst = top_worst.max(ext.top_row_im_max);
    }
    items.push(CheckItem::enforced(
        "extension interior relation residual",
        interior_worst,
        1e-9,
    ));
    items.push(CheckItem::enforced(
        "extension side-wall Riemann residual",
        side_worst,
        1e-9,
    ));
    items.push(CheckItem::enforced(
        "extension top-row imaginary part",
        top_worst,
        1e-9,
    ));
    // Displayed-backend extension residual, reported.
    let op_displayed = rps_operator(
        Model::At,
        Regime::Subcritical,
        &interval,
        0.4,
        2,
        RpsBackend::Displayed,
    )?;
    let ext = extend_kernel(&op_displayed, &[1.0, 0.0, 0.0])?;
    items.push(CheckItem::reported(
        "displayed-rows extension interior residual (boundary rows; ledger)",
        ext.interior_relation_max,
    ));
    // u = 0 => h = 0.
    let ext = extend_kernel(&op, &[0.0, 0.0, 0.0])?;
    let zero_max = ext
        .rows
        .iter()
        .flatten()
        .map(|&(re, im)| re.abs().max(im.abs()))
        .fold(0.0f64, f64::max);
    items.push(CheckItem::enforced("u = 0 implies h = 0", zero_max, 1e-15));
    Ok(CriterionReport::new(10, "rps operators", items))
}

/// Criterion 11: loop transfer matrix vs direct row-by-row enumeration.
pub fn criterion_11() -> Result<CriterionReport> {
    // Width <= 2, N <= 3, exact to 1e-10: recompute the comparison here,
    // independent of the unit test.
    let width = 2usize;
    let (k_weight, n_loops) = (0.75, 1.4);
    let t = build_loop_transfer(width, k_weight, n_loops)?;
    let dim = t.basis.dim();
    let empty = t
        .basis
        .index_of(&LinkPattern {
            pair: vec![None; width],
        })
        .unwrap();
    let mut worst = 0.0f64;
    for n_rows in 1..=3usize {
        let mut z = vec![0.0f64; dim];
        z[empty] = 1.0;
        for _ in 0..n_rows {
            let mut nz = vec![0.0f64; dim];
            for a in 0..dim {
                for b in 0..dim {
                    nz[a] += t.matrix[[a, b]] * z[b];
                }
            }
            z = nz;
        }
        let direct = direct_loop_strip(width, k_weight, n_loops, n_rows, &t)?;
        for a in 0..dim {
            worst = worst.max((z[a] - direct[a]).abs());
        }
    }
    let items = vec![CheckItem::enforced(
        "T-iteration vs direct enumeration (width 2, N <= 3)",
        worst,
        1e-10,
    )];
    Ok(CriterionReport::new(11, "loop transfer matrix", items))
}

/// Direct stacked-strip enumeration binned by top connectivity.
fn direct_loop_strip(
    width: usize,
    k_weight: f64,
    n_loops: f64,
    n_rows: usize,
    t: &crate::transfer::LoopTransfer,
) -> Result<Vec<f64>> {
    use crate::oracle::{count_loops, for_each_even_subgraph, EdgeGraph};
    let chain = 2 * width;
    let vid = |r: usize, x: usize| r * chain + x;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for r in 0..n_rows {
        for x in 0..chain - 1 {
            edges.push((vid(r, x), vid(r, x + 1)));
        }
        if r + 1 < n_rows {
            for s in 0..width {
                edges.push((vid(r, 2 * s + 1), vid(r + 1, 2 * s)));
            }
        }
    }
    let mut n_vertices = n_rows * chain;
    let mut top_slot_edge = Vec::new();
    for s in 0..width {
        let extra = n_vertices;
        n_vertices += 1;
        top_slot_edge.push(edges.len());
        edges.push((vid(n_rows - 1, 2 * s + 1), extra));
    }
    let graph = EdgeGraph {
        n_vertices,
        edges: edges.clone(),
    };
    let mut odd_ok = vec![false; n_vertices];
    for s in 0..width {
        odd_ok[n_rows * chain + s] = true;
    }
    let dim = t.basis.dim();
    let mut direct = vec![0.0f64; dim];
    for_each_even_subgraph(&graph, &odd_ok, |subset| {
        let mut touched = vec![false; n_vertices];
        for (i, &(a, b)) in edges.iter().enumerate() {
            if subset >> i & 1 == 1 {
                touched[a] = true;
                touched[b] = true;
            }
        }
        let n_v = (0..n_rows * chain).filter(|&v| touched[v]).count();
        let loops = count_loops(&graph, subset);
        let mut parent: Vec<usize> = (0..n_vertices).collect();
        fn find(p: &mut Vec<usize>, mut a: usize) -> usize {
            while p[a] != a {
                p[a] = p[p[a]];
                a = p[a];
            }
            a
        }
        for (i, &(a, b)) in edges.iter().enumerate() {
            if subset >> i & 1 == 1 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
        let mut pair = vec![None; width];
        let mut roots: std::collections::HashMap<usize, Vec<usize>> =
            std::collections::HashMap::new();
        for s in 0..width {
            if subset >> top_slot_edge[s] & 1 == 1 {
                let r = find(&mut parent, n_rows * chain + s);
                roots.entry(r).or_default().push(s);
            }
        }
        for (_, slots) in roots {
            if slots.len() == 2 {
                pair[slots[0]] = Some(slots[1]);
                pair[slots[1]] = Some(slots[0]);
            } else {
                return;
            }
        }
        if let Some(idx) = t.basis.index_of(&LinkPattern { pair }) {
            direct[idx] += k_weight.powi(n_v as i32) * n_loops.powi(loops as i32);
        }
    })?;
    Ok(direct)
}

/// Criterion 12: Fock spectrum identity at |I| = 2, beta = 0.4.
pub fn criterion_12() -> Result<CriterionReport> {
    let basis = SpinBasis::ising(2)?;
    let g = clifford_generators(&basis)?;
    let v = build_ising_transfer(2, 0.4, SideBc::Plus)?;
    let rot = induced_rotation(&v, &g, 1e-9)?;
    let sector = flip_even_spectrum(&v)?;
    let above: Vec<C64> = rot
        .eigenvalues()?
        .into_iter()
        .filter(|z| z.norm() > 1.0)
        .collect();
    let fock = crate::fock::fock_spectrum(c(sector[0], 0.0), &above, 1 << above.len());
    let mut worst = 0.0f64;
    for (f, s) in fock.values.iter().zip(sector.iter()) {
        worst = worst.max((f.0 - s).abs() / s.abs().max(1e-30));
    }
    let items = vec![
        CheckItem::flag("list lengths match", fock.values.len() == sector.len()),
        CheckItem::enforced(
            "flip-even sector spectrum vs Lambda0 prod lambda^-1 rel err",
            worst,
            1e-6,
        ),
    ];
    Ok(CriterionReport::new(12, "fock spectrum identity", items))
}

/// Run one criterion by number.
pub fn criterion(number: usize) -> Result<CriterionReport> {
    match number {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(),
        8 => criterion_8(),
        9 => criterion_9(),
        10 => criterion_10(),
        11 => criterion_11(),
        12 => criterion_12(),
        _ => Err(crate::Error::Domain(format!(
            "no acceptance criterion {number}; valid range 1..=12"
        ))),
    }
}

/// Named suites for the command line.
pub fn suite_by_name(name: &str) -> Result<Vec<CriterionReport>> {
    let numbers: Vec<usize> = match name {
        "all" => (1..=12).collect(),
        "propagator" => vec![1, 2],
        "pfaffian" => vec![3],
        "duality" => vec![4],
        "transfer" => vec![5],
        "ising-rc" => vec![6],
        "sholo-paths" => vec![7],
        "theorem4" => vec![8],
        "theorem56" => vec![9],
        "rps" => vec![10],
        "loop-transfer" => vec![11],
        "fock" => vec![12],
        other => {
            if let Ok(k) = other.parse::<usize>() {
                vec![k]
            } else {
                return Err(crate::Error::Domain(format!(
                    "unknown suite '{other}'; use all, propagator, pfaffian, duality, transfer, ising-rc, sholo-paths, theorem4, theorem56, rps, loop-transfer, fock, or a criterion number"
                )));
            }
        }
    };
    numbers.into_iter().map(criterion).collect()
}
