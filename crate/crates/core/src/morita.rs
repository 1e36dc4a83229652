//! Morita verdicts M1–M5 for two crossed-product triples joined by a bitorsor.

use std::sync::Arc;

use serde::Serialize;

use crate::algebra::{AlgebraElement, HaarConvention};
use crate::bimodule::{check_imprimitivity, BimoduleElement};
use crate::bitorsor::{quotient_bitorsor, MoritaBitorsor};
use crate::dirac::{approximate_sign, spectrum, SpectralTripleData};
use crate::error::{Error, Result};
use crate::geometry::DiscreteOrbifold;
use crate::induction::{
    chi_iso, induced_dirac, induced_space, induced_triple, pushforward_bundle, u_phi, ChiIso, GeneratorSet,
    InducedBundle, InducedHilbert,
};
use crate::linalg::{self, CMatrix};

/// Residual threshold for the exact (unitary-equivalence) checks.
pub const EXACT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Status::Pass
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomStatus {
    pub name: String,
    pub status: Status,
    pub residual: Option<f64>,
    pub witness: Option<String>,
}

impl AxiomStatus {
    fn new(name: &str, status: Status, residual: Option<f64>, witness: Option<String>) -> Self {
        Self {
            name: name.into(),
            status,
            residual,
            witness,
        }
    }

    fn error(name: &str, e: &Error) -> Self {
        Self::new(name, Status::Fail, None, Some(e.to_string()))
    }

    pub fn passed(&self) -> bool {
        self.status.passed()
    }
}

/// M1: the bitorsor yields an imprimitivity bimodule.
pub fn check_m1(b: &Arc<MoritaBitorsor>, samples: usize, seed: u64) -> AxiomStatus {
    match check_imprimitivity(b, samples, seed) {
        Ok(r) => {
            let worst = r.axioms.iter().map(|a| a.residual).fold(0.0, f64::max);
            let witness = r
                .axioms
                .iter()
                .filter(|a| !a.passed)
                .map(|a| format!("{}: {}", a.name, a.witness.clone().unwrap_or_default()))
                .collect::<Vec<_>>();
            let witness = (!witness.is_empty()).then(|| witness.join("; "));
            AxiomStatus::new("M1", Status::from_bool(r.passed), Some(worst), witness)
        }
        Err(e) => AxiomStatus::error("M1", &e),
    }
}

/// Induced objects shared by M2 and M3.
#[derive(Debug, Clone)]
pub struct Induction {
    pub hilbert: InducedHilbert,
    pub bundle: InducedBundle,
    pub chi: ChiIso,
    /// `W = χ/√c`, from the induced quotient to orthonormal coordinates of `𝓗₂`.
    pub intertwiner: CMatrix,
}

pub fn induce(b: &Arc<MoritaBitorsor>, t1: &SpectralTripleData, t2: &SpectralTripleData) -> Result<Induction> {
    let hilbert = induced_space(b, t1, GeneratorSet::Local)?;
    let bundle = pushforward_bundle(b, t1.bundle(), t2.bundle().base())?;
    let chi = chi_iso(&hilbert, &bundle)?;
    if chi.rank != t2.hilbert_dim() {
        return Err(Error::Structural(format!(
            "induced space has dimension {} but the second triple has {}",
            chi.rank,
            t2.hilbert_dim()
        )));
    }
    let intertwiner = chi.matrix.map(|z| z / chi.scale.sqrt());
    Ok(Induction {
        hilbert,
        bundle,
        chi,
        intertwiner,
    })
}

/// Residuals of the M2 intertwining.
#[derive(Debug, Clone, Serialize)]
pub struct M2Residuals {
    pub unitarity: f64,
    pub algebra: f64,
    pub dirac: f64,
    pub grading: f64,
    pub chi_scale: f64,
    pub chi_scale_deviation: f64,
}

/// M2: `W` is unitary and carries `π̃`, the induced Dirac operator and the
/// induced grading onto `π₂`, `D₂` and `ω₂`.
pub fn check_m2(b: &Arc<MoritaBitorsor>, t1: &SpectralTripleData, t2: &SpectralTripleData) -> (AxiomStatus, Option<(Induction, M2Residuals)>) {
    let run = || -> Result<(Induction, M2Residuals)> {
        let ind = induce(b, t1, t2)?;
        let w = &ind.intertwiner;
        let n = w.ncols();
        let unitarity = linalg::max_abs_diff(&(w.adjoint() * w), &CMatrix::identity(n, n))
            .max(linalg::max_abs_diff(&(w * w.adjoint()), &CMatrix::identity(n, n)));
        let mut algebra = 0.0_f64;
        for arrow in b.left().arrows() {
            let a = AlgebraElement::delta(b.left(), arrow);
            let (pi, _) = ind.hilbert.left_action_matrix(&a)?;
            algebra = algebra.max(linalg::spectral_norm(&(w * pi * w.adjoint() - t2.rep_orthonormal(&a)?)));
        }
        let d_sharp = induced_dirac(&ind.bundle, t1.dirac())?;
        let d_hat = d_sharp.bundle().to_orthonormal(d_sharp.matrix());
        let dirac = linalg::spectral_norm(&(d_hat - t2.dirac_orthonormal()));
        let g_hat = d_sharp.bundle().to_orthonormal(&d_sharp.grading_or_identity());
        let grading = linalg::spectral_norm(&(g_hat - t2.grading_orthonormal()));
        let r = M2Residuals {
            unitarity,
            algebra,
            dirac,
            grading,
            chi_scale: ind.chi.scale,
            chi_scale_deviation: ind.chi.scale_deviation,
        };
        Ok((ind, r))
    };
    match run() {
        Ok((ind, r)) => {
            let parts = [
                ("unitarity", r.unitarity),
                ("algebra", r.algebra),
                ("Dirac", r.dirac),
                ("grading", r.grading),
            ];
            let worst = parts.iter().map(|p| p.1).fold(0.0, f64::max);
            let witness = parts
                .iter()
                .filter(|p| p.1 > EXACT_TOL)
                .map(|p| format!("{} residual {:.3e}", p.0, p.1))
                .collect::<Vec<_>>();
            let status = Status::from_bool(witness.is_empty());
            let witness = (!witness.is_empty()).then(|| witness.join("; "));
            (AxiomStatus::new("M2", status, Some(worst), witness), Some((ind, r)))
        }
        Err(e) => (AxiomStatus::error("M2", &e), None),
    }
}

/// `max_u ‖T_u F₁ − F̃₂ T_u‖` and `max_u ‖T_u* F̃₂ − F₁ T_u*‖` over point
/// masses `u = δ_q`, with `F̃₂ = W* F₂ W`.
pub fn connection_defects(ind: &Induction, t1: &SpectralTripleData, t2: &SpectralTripleData) -> (f64, f64) {
    let f1 = approximate_sign(&t1.dirac_orthonormal());
    let w = &ind.intertwiner;
    let f2 = w.adjoint() * approximate_sign(&t2.dirac_orthonormal()) * w;
    let b = ind.hilbert.bitorsor();
    let mut fwd = 0.0_f64;
    let mut back = 0.0_f64;
    for q in 0..b.size() {
        let tu = ind.hilbert.t_u(&BimoduleElement::delta(b, q));
        fwd = fwd.max(linalg::spectral_norm(&(&tu * &f1 - &f2 * &tu)));
        back = back.max(linalg::spectral_norm(&(tu.adjoint() * &f2 - &f1 * tu.adjoint())));
    }
    (fwd, back)
}

/// Defect of the connection condition along a constant `u`.
pub fn constant_defect(ind: &Induction, t1: &SpectralTripleData, t2: &SpectralTripleData) -> f64 {
    let f1 = approximate_sign(&t1.dirac_orthonormal());
    let w = &ind.intertwiner;
    let f2 = w.adjoint() * approximate_sign(&t2.dirac_orthonormal()) * w;
    let tu = ind.hilbert.t_u(&BimoduleElement::constant(ind.hilbert.bitorsor(), linalg::c(1.0)));
    linalg::spectral_norm(&(&tu * f1 - f2 * &tu))
}

/// M3 at a single mesh: the defects are finite and recorded. Boundedness
/// under refinement is checked by [`m3_refinement`].
pub fn check_m3(ind: &Induction, t1: &SpectralTripleData, t2: &SpectralTripleData) -> AxiomStatus {
    let (fwd, back) = connection_defects(ind, t1, t2);
    let worst = fwd.max(back);
    AxiomStatus::new(
        "M3",
        Status::from_bool(worst.is_finite()),
        Some(worst),
        Some(format!("‖T_u F₁ − F̃₂ T_u‖ = {fwd:.6e}, ‖T_u* F̃₂ − F₁ T_u*‖ = {back:.6e}")),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct M3Row {
    pub n: usize,
    pub dirac_norm: f64,
    pub forward_defect: f64,
    pub backward_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct M3Sweep {
    pub rows: Vec<M3Row>,
    /// Largest `defect(2n) / defect(n)` over both defects.
    pub worst_ratio: f64,
    pub passed: bool,
}

/// M3 refinement family: half-turn quotients of circles of the given
/// circumference, rank 1. Passes when every defect ratio between successive
/// meshes is at most `1.1`.
pub fn m3_refinement(ns: &[usize], circumference: f64, haar: HaarConvention) -> Result<M3Sweep> {
    let rows = ns
        .iter()
        .map(|&n| {
            let m = crate::models::rotation_quotient(n, 1, circumference, haar)?;
            let ind = induce(&m.bitorsor, &m.crossed, &m.quotient)?;
            let (forward_defect, backward_defect) = connection_defects(&ind, &m.crossed, &m.quotient);
            Ok(M3Row {
                n,
                dirac_norm: linalg::spectral_norm(&m.crossed.dirac_orthonormal()),
                forward_defect,
                backward_defect,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst_ratio = rows
        .windows(2)
        .map(|w| (w[1].forward_defect / w[0].forward_defect).max(w[1].backward_defect / w[0].backward_defect))
        .fold(0.0, f64::max);
    Ok(M3Sweep {
        passed: worst_ratio <= 1.1,
        rows,
        worst_ratio,
    })
}

/// Weyl exponent from `N(Λ) ~ Λ^d` over nonzero `|λ| ≤ max|λ|/2`.
/// `None` when fewer than 8 eigenvalues qualify.
pub fn weyl_exponent(eigenvalues: &[f64]) -> Option<f64> {
    let top = eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut mags: Vec<f64> = eigenvalues
        .iter()
        .map(|v| v.abs())
        .filter(|&v| v > 1e-9 * top.max(1.0) && v <= top / 2.0)
        .collect();
    if mags.len() < 8 {
        return None;
    }
    mags.sort_by(f64::total_cmp);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in mags.iter().enumerate() {
        let count = (i + 1) as f64;
        match pts.last_mut() {
            Some(last) if (last.0 - v.ln()).abs() < 1e-9 => last.1 = count.ln(),
            _ => pts.push((v.ln(), count.ln())),
        }
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionEstimate {
    pub fitted: [Option<f64>; 2],
    pub declared: [Option<f64>; 2],
    pub method: String,
}

/// M4: Weyl exponents agree within `0.2`; falls back to declared dimensions
/// when either spectrum is too small for a fit.
pub fn check_m4(t1: &SpectralTripleData, t2: &SpectralTripleData) -> (AxiomStatus, DimensionEstimate) {
    let fit = |t: &SpectralTripleData| spectrum(&t.dirac_orthonormal()).ok().and_then(|s| weyl_exponent(&s));
    let fitted = [fit(t1), fit(t2)];
    let declared = [t1.declared_dimension(), t2.declared_dimension()];
    let (status, residual, method) = match (fitted, declared) {
        ([Some(a), Some(b)], _) => (Status::from_bool((a - b).abs() <= 0.2), Some((a - b).abs()), "weyl fit"),
        (_, [Some(a), Some(b)]) => (Status::from_bool(a == b), Some((a - b).abs()), "declared dimension"),
        _ => (Status::Inconclusive, None, "insufficient spectrum"),
    };
    let witness = format!("fitted {fitted:?}, declared {declared:?} ({method})");
    (
        AxiomStatus::new("M4", status, residual, Some(witness)),
        DimensionEstimate {
            fitted,
            declared,
            method: method.into(),
        },
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct M5Details {
    pub scale: f64,
    pub expected_scale: f64,
    pub isometry_defect: f64,
    pub dirac_residual: f64,
    pub grading_residual: f64,
    pub algebra_residual: f64,
    pub spectral_deviation: Option<f64>,
}

/// M5: `U_φ` is unitary and intertwines the invariant triples.
pub fn check_m5(b: &Arc<MoritaBitorsor>, t1: &SpectralTripleData, t2: &SpectralTripleData) -> (AxiomStatus, Option<M5Details>) {
    let run = || -> Result<M5Details> {
        let bundle = pushforward_bundle(b, t1.bundle(), t2.bundle().base())?;
        let u = u_phi(&bundle, t1, t2)?;
        Ok(M5Details {
            scale: u.scale,
            expected_scale: (b.right().group_order() as f64 / b.left().group_order() as f64).sqrt(),
            isometry_defect: u.isometry_defect,
            dirac_residual: u.dirac_residual,
            grading_residual: u.grading_residual,
            algebra_residual: u.algebra_residual,
            spectral_deviation: u.spectral_deviation,
        })
    };
    match run() {
        Ok(d) => {
            let worst = [d.isometry_defect, d.dirac_residual, d.grading_residual, d.algebra_residual]
                .into_iter()
                .fold(0.0, f64::max);
            let witness = match d.spectral_deviation {
                Some(s) => format!("invariant spectra differ by {s:.3e}"),
                None => "invariant spectra have different sizes".into(),
            };
            (
                AxiomStatus::new("M5", Status::from_bool(worst <= EXACT_TOL), Some(worst), Some(witness)),
                Some(d),
            )
        }
        Err(e) => (AxiomStatus::error("M5", &e), None),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothnessVerdict {
    pub positive: bool,
    pub singular_vertices: Vec<usize>,
    pub spectral_deviation: Option<f64>,
    pub witness: String,
}

/// A free action is Morita equivalent to its invariant triple: the quotient
/// bitorsor induces a triple on the orbit space whose spectrum matches the
/// invariant spectrum.
pub fn smoothness_verdict(t: &SpectralTripleData, haar: HaarConvention) -> Result<SmoothnessVerdict> {
    let orb = DiscreteOrbifold::new(t.bundle().base().clone(), t.groupoid().action().clone())?;
    let locus = orb.singular_locus();
    if !locus.is_empty() {
        let ids = locus.vertex_ids();
        return Ok(SmoothnessVerdict {
            positive: false,
            witness: format!("singular vertices {ids:?}"),
            singular_vertices: ids,
            spectral_deviation: None,
        });
    }
    let b = Arc::new(quotient_bitorsor(&orb, haar)?);
    let (_, induced) = induced_triple(&b, t, &orb.quotient_graph()?)?;
    let inv = t.invariant_triple()?.spectrum()?;
    let quot = spectrum(&induced.dirac_orthonormal())?;
    let dev = linalg::spectrum_deviation(&inv, &quot);
    let positive = dev.is_some_and(|d| d <= EXACT_TOL);
    Ok(SmoothnessVerdict {
        positive,
        singular_vertices: vec![],
        spectral_deviation: dev,
        witness: match dev {
            Some(d) => format!("invariant and quotient spectra differ by {d:.3e}"),
            None => format!("invariant spectrum has {} values, quotient {}", inv.len(), quot.len()),
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MoritaReport {
    pub passed: bool,
    pub axioms: Vec<AxiomStatus>,
    pub m2: Option<M2Residuals>,
    pub m3_constant_defect: Option<f64>,
    pub dimensions: DimensionEstimate,
    pub m5: Option<M5Details>,
    pub smoothness: Option<SmoothnessVerdict>,
}

impl MoritaReport {
    pub fn axiom(&self, name: &str) -> Option<&AxiomStatus> {
        self.axioms.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { samples: 100, seed: 0 }
    }
}

/// Runs M1–M5; the verdict is their conjunction. The smoothness verdict is
/// attached for the first triple.
pub fn full_report(b: &Arc<MoritaBitorsor>, t1: &SpectralTripleData, t2: &SpectralTripleData, opts: ReportOptions) -> MoritaReport {
    let (m1, (m2, ind), (m4, dims), (m5, m5d)) = std::thread::scope(|s| {
        let h1 = s.spawn(|| check_m1(b, opts.samples, opts.seed));
        let h2 = s.spawn(|| check_m2(b, t1, t2));
        let h4 = s.spawn(|| check_m4(t1, t2));
        let h5 = s.spawn(|| check_m5(b, t1, t2));
        (
            h1.join().expect("M1 worker"),
            h2.join().expect("M2 worker"),
            h4.join().expect("M4 worker"),
            h5.join().expect("M5 worker"),
        )
    });
    let (m3, m2r, constant) = match ind {
        Some((ind, r)) => (check_m3(&ind, t1, t2), Some(r), Some(constant_defect(&ind, t1, t2))),
        None => (
            AxiomStatus::new("M3", Status::Fail, None, Some("no intertwiner from M2".into())),
            None,
            None,
        ),
    };
    let axioms = vec![m1, m2, m3, m4, m5];
    let smoothness = smoothness_verdict(t1, t1.groupoid().haar()).ok();
    MoritaReport {
        passed: axioms.iter().all(AxiomStatus::passed),
        axioms,
        m2: m2r,
        m3_constant_defect: constant,
        dimensions: dims,
        m5: m5d,
        smoothness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitorsor::{compose_bitorsors, dual_bitorsor};
    use crate::models;

    fn quotient() -> models::QuotientModel {
        models::rotation_quotient(6, 1, 6.0, HaarConvention::Counting).unwrap()
    }

    #[test]
    fn theorem_instance_passes() {
        let m = quotient();
        let r = full_report(&m.bitorsor, &m.crossed, &m.quotient, ReportOptions { samples: 20, seed: 1 });
        assert!(r.passed, "{:#?}", r.axioms);
        let m5 = r.m5.unwrap();
        assert!((m5.scale - 2f64.sqrt()).abs() < 1e-12);
        assert!(r.m3_constant_defect.unwrap() < 1e-10);
        assert!(r.smoothness.unwrap().positive);
    }

    #[test]
    fn reflexive_symmetric_transitive() {
        let m = quotient();
        let id = models::identity_for(&m.crossed).unwrap();
        let opts = ReportOptions { samples: 10, seed: 2 };
        assert!(full_report(&id, &m.crossed, &m.crossed, opts).passed);
        let dual = Arc::new(dual_bitorsor(&m.bitorsor));
        let r = full_report(&dual, &m.quotient, &m.crossed, opts);
        assert!(r.passed, "{:#?}", r.axioms);
        let comp = Arc::new(compose_bitorsors(&m.bitorsor, &dual).unwrap());
        let r = full_report(&comp, &m.quotient, &m.quotient, opts);
        assert!(r.passed, "{:#?}", r.axioms);
    }

    #[test]
    fn doubled_dirac_fails_m2() {
        let m = quotient();
        let doubled = m.quotient.with_dirac(m.quotient.dirac().scaled(2.0)).unwrap();
        let (s, _) = check_m2(&m.bitorsor, &m.crossed, &doubled);
        assert_eq!(s.status, Status::Fail);
        assert!(s.witness.unwrap().contains("Dirac"));
        let (s5, d) = check_m5(&m.bitorsor, &m.crossed, &doubled);
        assert_eq!(s5.status, Status::Fail);
        assert!(d.unwrap().spectral_deviation.unwrap() > 0.1);
    }

    #[test]
    fn weyl_exponents() {
        let (_, c) = models::circle(64, 1, 64.0, HaarConvention::Counting).unwrap();
        let d = weyl_exponent(&spectrum(&c.dirac_orthonormal()).unwrap()).unwrap();
        assert!((d - 1.0).abs() < 0.2, "{d}");
        let t = models::torus(24, 24, 1.0, HaarConvention::Counting).unwrap();
        let d2 = weyl_exponent(&spectrum(&t.dirac_orthonormal()).unwrap()).unwrap();
        assert!((d2 - 2.0).abs() < 0.3, "{d2}");
        assert_eq!(check_m4(&c, &t).0.status, Status::Fail);
        assert_eq!(check_m4(&c, &c).0.status, Status::Pass);
        assert!(weyl_exponent(&[1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn m3_defects_stay_bounded() {
        let sweep = m3_refinement(&[16, 32, 64], 1.0, HaarConvention::Counting).unwrap();
        assert!(sweep.passed, "{sweep:#?}");
        assert!(sweep.rows[1].dirac_norm > 1.9 * sweep.rows[0].dirac_norm);
    }

    #[test]
    fn reflection_is_not_smooth() {
        let (_, t) = models::reflection(8, 8.0, HaarConvention::Counting).unwrap();
        let v = smoothness_verdict(&t, HaarConvention::Counting).unwrap();
        assert!(!v.positive);
        assert_eq!(v.singular_vertices, vec![0, 4]);
    }
}
