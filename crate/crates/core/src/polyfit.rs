//! Per-cluster polynomial regression: trivariate monomial features over
//! min-max normalized positions, least-squares fits for the four attribute
//! groups, and degree selection by grid search.

use crate::error::{Error, Result};
use crate::splat::ActivatedSplat;
use nalgebra::DMatrix;

pub const MAX_DEGREE: usize = 10;
/// Degenerate normalization axes are widened by this amount on each side.
const AXIS_WIDEN: f64 = 1e-9;
/// Degrees whose MSE is within 1% relative (plus this absolute slack, which
/// settles exact-fit ties) of the best are considered equivalent; the
/// smallest such degree wins.
const MSE_TIE_REL: f64 = 0.01;
const MSE_TIE_ABS: f64 = 1e-12;

/// The four modeled attribute groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeKind {
    Scaling,
    Rotation,
    Opacity,
    Color,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 4] = [
        AttributeKind::Scaling,
        AttributeKind::Rotation,
        AttributeKind::Opacity,
        AttributeKind::Color,
    ];

    pub fn dim(&self) -> usize {
        match self {
            AttributeKind::Scaling => 3,
            AttributeKind::Rotation => 4,
            AttributeKind::Opacity => 1,
            AttributeKind::Color => 48,
        }
    }
}

/// Total attribute width across the four groups (3 + 4 + 1 + 48).
pub const ATTR_TOTAL_DIM: usize = 56;

/// A fitted polynomial model for one attribute group.
#[derive(Debug, Clone)]
pub struct PolyModel {
    pub degree: usize,
    /// feature_count(degree) x attribute-dim coefficient matrix.
    pub coeffs: DMatrix<f64>,
    pub norm_min: [f64; 3],
    pub norm_max: [f64; 3],
}

/// A fitted Sketch cluster: members, per-attribute models, and fit quality.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub member_indices: Vec<usize>,
    /// Indexed by `AttributeKind::ALL` order.
    pub models: [PolyModel; 4],
    pub mse_per_attr: [f64; 4],
    pub mse_combined: f64,
}

/// (d+1)(d+2)(d+3)/6 monomials of total degree <= d in three variables.
pub fn polynomial_feature_count(d: usize) -> usize {
    (d + 1) * (d + 2) * (d + 3) / 6
}

/// Monomial exponent triples in graded-lexicographic order; the features of
/// degree <= d are exactly the first `polynomial_feature_count(d)` entries.
pub fn monomial_exponents(d: usize) -> Vec<[u32; 3]> {
    let mut out = Vec::with_capacity(polynomial_feature_count(d));
    for total in 0..=d as u32 {
        for a in (0..=total).rev() {
            for b in (0..=total - a).rev() {
                out.push([a, b, total - a - b]);
            }
        }
    }
    out
}

/// Evaluates all monomials up to degree `d` at each row of `x_norm`.
pub fn polynomial_features(x_norm: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let n = x_norm.nrows();
    let exps = monomial_exponents(d);
    let mut phi = DMatrix::zeros(n, exps.len());
    // Precompute powers per axis up to d.
    for row in 0..n {
        let mut pow = [[1.0f64; MAX_DEGREE + 1]; 3];
        for axis in 0..3 {
            for p in 1..=d {
                pow[axis][p] = pow[axis][p - 1] * x_norm[(row, axis)];
            }
        }
        for (col, e) in exps.iter().enumerate() {
            phi[(row, col)] =
                pow[0][e[0] as usize] * pow[1][e[1] as usize] * pow[2][e[2] as usize];
        }
    }
    phi
}

/// Per-cluster min-max normalization bounds, degenerate axes widened.
pub fn normalization_bounds(positions: &[[f64; 3]]) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in positions {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    for a in 0..3 {
        if hi[a] - lo[a] < AXIS_WIDEN {
            lo[a] -= AXIS_WIDEN;
            hi[a] += AXIS_WIDEN;
        }
    }
    (lo, hi)
}

/// Maps positions through stored bounds; values outside [0,1] are allowed.
pub fn normalize_positions(
    positions: &[[f64; 3]],
    lo: &[f64; 3],
    hi: &[f64; 3],
) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(positions.len(), 3);
    for (row, p) in positions.iter().enumerate() {
        for a in 0..3 {
            x[(row, a)] = (p[a] - lo[a]) / (hi[a] - lo[a]);
        }
    }
    x
}

/// Least-squares solve of `phi * coeffs = targets` via QR, falling back to
/// SVD (minimum-norm) when the system is underdetermined or rank-deficient.
fn solve_least_squares(phi: &DMatrix<f64>, targets: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (phi.nrows(), phi.ncols());
    if n >= m {
        let qr = phi.clone().qr();
        let r = qr.r();
        let max_diag = (0..m).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
        let rank_ok = (0..m).all(|i| r[(i, i)].abs() > max_diag * 1e-12) && max_diag > 0.0;
        if rank_ok {
            let qtb = qr.q().transpose() * targets;
            if let Some(sol) = r.solve_upper_triangular(&qtb) {
                return sol;
            }
        }
    }
    let svd = phi.clone().svd(true, true);
    svd.solve(targets, 1e-12 * svd.singular_values.max())
        .expect("svd solve")
}

/// Fits one attribute group at a fixed degree. Returns coefficients and the
/// mean squared row-residual norm.
pub fn fit_attribute(
    x_norm: &DMatrix<f64>,
    attribute: &DMatrix<f64>,
    d: usize,
) -> Result<(DMatrix<f64>, f64)> {
    if x_norm.iter().any(|v| !v.is_finite()) || attribute.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite input to fit_attribute".into()));
    }
    let phi = polynomial_features(x_norm, d);
    let coeffs = solve_least_squares(&phi, attribute);
    let mse = residual_mse(&phi, &coeffs, attribute);
    Ok((coeffs, mse))
}

fn residual_mse(phi: &DMatrix<f64>, coeffs: &DMatrix<f64>, attribute: &DMatrix<f64>) -> f64 {
    let resid = phi * coeffs - attribute;
    resid.iter().map(|v| v * v).sum::<f64>() / phi.nrows() as f64
}

/// Sign-canonicalized unit quaternion: w >= 0, ties by the first nonzero
/// component. Avoids double-cover discontinuities in the rotation fit.
pub fn canonical_quaternion(q: &[f64; 4]) -> [f64; 4] {
    let mut out = *q;
    for v in out {
        if v != 0.0 {
            if v < 0.0 {
                for c in out.iter_mut() {
                    *c = -*c;
                }
            }
            break;
        }
    }
    out
}

/// Builds the four n x dim attribute matrices for a member set.
pub fn extract_attributes(
    activated: &[ActivatedSplat],
    members: &[usize],
) -> [DMatrix<f64>; 4] {
    let n = members.len();
    let mut scaling = DMatrix::zeros(n, 3);
    let mut rotation = DMatrix::zeros(n, 4);
    let mut opacity = DMatrix::zeros(n, 1);
    let mut color = DMatrix::zeros(n, 48);
    for (row, &i) in members.iter().enumerate() {
        let s = &activated[i];
        for a in 0..3 {
            scaling[(row, a)] = s.scale[a];
        }
        let q = canonical_quaternion(&s.rot_unit);
        for a in 0..4 {
            rotation[(row, a)] = q[a];
        }
        opacity[(row, 0)] = s.opacity;
        for a in 0..3 {
            color[(row, a)] = s.sh_dc[a];
        }
        for a in 0..45 {
            color[(row, 3 + a)] = s.sh_rest[a];
        }
    }
    [scaling, rotation, opacity, color]
}

/// Member positions in cluster order.
pub fn member_positions(activated: &[ActivatedSplat], members: &[usize]) -> Vec<[f64; 3]> {
    members.iter().map(|&i| activated[i].position).collect()
}

/// Largest admissible degree for a cluster of `n` splats:
/// feature_count(d) <= max(4, n/2).
pub fn degree_cap(n: usize) -> usize {
    let budget = 4.max(n / 2);
    let mut cap = 1;
    for d in 1..=MAX_DEGREE {
        if polynomial_feature_count(d) <= budget {
            cap = d;
        }
    }
    cap
}

/// Grid-searches degrees 1..=degree_cap independently per attribute and
/// returns the fitted cluster model with equal-weight combined MSE.
pub fn grid_search_fit(
    positions: &[[f64; 3]],
    attributes: &[DMatrix<f64>; 4],
    member_indices: Vec<usize>,
) -> Result<ClusterModel> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::Input("grid_search_fit: empty cluster".into()));
    }
    let (lo, hi) = normalization_bounds(positions);
    let x_norm = normalize_positions(positions, &lo, &hi);
    let cap = degree_cap(n);

    // One decomposition per degree serves all four attribute groups.
    let stacked = {
        let mut m = DMatrix::zeros(n, ATTR_TOTAL_DIM);
        let mut col = 0;
        for a in attributes {
            m.view_mut((0, col), (n, a.ncols())).copy_from(a);
            col += a.ncols();
        }
        m
    };
    if stacked.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite attribute values".into()));
    }

    let phi_max = polynomial_features(&x_norm, cap);
    let mut per_degree: Vec<(DMatrix<f64>, [f64; 4])> = Vec::with_capacity(cap);
    for d in 1..=cap {
        let m = polynomial_feature_count(d);
        let phi = phi_max.columns(0, m).into_owned();
        let coeffs = solve_least_squares(&phi, &stacked);
        let pred = &phi * &coeffs;
        let mut mse = [0.0f64; 4];
        let mut col = 0;
        for (k, kind) in AttributeKind::ALL.iter().enumerate() {
            let dim = kind.dim();
            let mut acc = 0.0;
            for row in 0..n {
                for c in col..col + dim {
                    let r = pred[(row, c)] - stacked[(row, c)];
                    acc += r * r;
                }
            }
            mse[k] = acc / n as f64;
            col += dim;
        }
        per_degree.push((coeffs, mse));
    }

    let mut models: Vec<PolyModel> = Vec::with_capacity(4);
    let mut mse_per_attr = [0.0f64; 4];
    let mut col = 0;
    for (k, kind) in AttributeKind::ALL.iter().enumerate() {
        let dim = kind.dim();
        let best = per_degree
            .iter()
            .map(|(_, mse)| mse[k])
            .fold(f64::INFINITY, f64::min);
        let threshold = best * (1.0 + MSE_TIE_REL) + MSE_TIE_ABS;
        let chosen = per_degree
            .iter()
            .position(|(_, mse)| mse[k] <= threshold)
            .unwrap();
        let (coeffs, mse) = &per_degree[chosen];
        let degree = chosen + 1;
        let m = polynomial_feature_count(degree);
        models.push(PolyModel {
            degree,
            coeffs: coeffs.view((0, col), (m, dim)).into_owned(),
            norm_min: lo,
            norm_max: hi,
        });
        mse_per_attr[k] = mse[k];
        col += dim;
    }

    let mse_combined = mse_per_attr.iter().sum::<f64>() * 0.25;
    let models: [PolyModel; 4] = models.try_into().unwrap();
    Ok(ClusterModel {
        member_indices,
        models,
        mse_per_attr,
        mse_combined,
    })
}

/// Decoded attribute rows at query positions, with output-domain clamping:
/// unit quaternions, opacity in (0,1) at 1e-6 margins, scales >= 1e-9.
#[derive(Debug, Clone)]
pub struct PredictedAttributes {
    pub scale: Vec<[f64; 3]>,
    pub rot_unit: Vec<[f64; 4]>,
    pub opacity: Vec<f64>,
    pub color: Vec<[f64; 48]>,
}

pub fn predict_attributes(models: &[PolyModel; 4], positions: &[[f64; 3]]) -> PredictedAttributes {
    let n = positions.len();
    let mut out = PredictedAttributes {
        scale: vec![[0.0; 3]; n],
        rot_unit: vec![[1.0, 0.0, 0.0, 0.0]; n],
        opacity: vec![0.5; n],
        color: vec![[0.0; 48]; n],
    };
    for (k, model) in models.iter().enumerate() {
        let x_norm = normalize_positions(positions, &model.norm_min, &model.norm_max);
        let pred = polynomial_features(&x_norm, model.degree) * &model.coeffs;
        match AttributeKind::ALL[k] {
            AttributeKind::Scaling => {
                for row in 0..n {
                    for a in 0..3 {
                        out.scale[row][a] = pred[(row, a)].max(1e-9);
                    }
                }
            }
            AttributeKind::Rotation => {
                for row in 0..n {
                    let mut q = [
                        pred[(row, 0)],
                        pred[(row, 1)],
                        pred[(row, 2)],
                        pred[(row, 3)],
                    ];
                    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        for v in q.iter_mut() {
                            *v /= norm;
                        }
                    } else {
                        q = [1.0, 0.0, 0.0, 0.0];
                    }
                    out.rot_unit[row] = q;
                }
            }
            AttributeKind::Opacity => {
                for row in 0..n {
                    out.opacity[row] = pred[(row, 0)].clamp(1e-6, 1.0 - 1e-6);
                }
            }
            AttributeKind::Color => {
                for row in 0..n {
                    for a in 0..48 {
                        out.color[row][a] = pred[(row, a)];
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn feature_count_formula() {
        assert_eq!(polynomial_feature_count(0), 1);
        assert_eq!(polynomial_feature_count(1), 4);
        assert_eq!(polynomial_feature_count(10), 286);
        for d in 1..=10 {
            assert_eq!(monomial_exponents(d).len(), polynomial_feature_count(d));
        }
    }

    #[test]
    fn features_at_origin_and_ones() {
        let x = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let phi = polynomial_features(&x, 2);
        assert_eq!(phi.ncols(), 10);
        assert_eq!(phi[(0, 0)], 1.0);
        for c in 1..10 {
            assert_eq!(phi[(0, c)], 0.0);
        }
        for c in 0..10 {
            assert_eq!(phi[(1, c)], 1.0);
        }
    }

    #[test]
    fn feature_order_is_graded_lex() {
        let exps = monomial_exponents(2);
        assert_eq!(
            exps,
            vec![
                [0, 0, 0],
                [1, 0, 0],
                [0, 1, 0],
                [0, 0, 1],
                [2, 0, 0],
                [1, 1, 0],
                [1, 0, 1],
                [0, 2, 0],
                [0, 1, 1],
                [0, 0, 2],
            ]
        );
    }

    #[test]
    fn features_multiplicative_consistency() {
        // phi entries match exponent arithmetic at sampled points
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pt = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
        let x = DMatrix::from_row_slice(1, 3, &pt);
        let phi = polynomial_features(&x, 4);
        for (col, e) in monomial_exponents(4).iter().enumerate() {
            let expect = pt[0].powi(e[0] as i32) * pt[1].powi(e[1] as i32) * pt[2].powi(e[2] as i32);
            assert!((phi[(0, col)] - expect).abs() < 1e-12);
        }
    }

    fn planted_targets(
        x_norm: &DMatrix<f64>,
        degree: usize,
        dim: usize,
        rng: &mut impl Rng,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = polynomial_feature_count(degree);
        let coeffs = DMatrix::from_fn(m, dim, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let phi = polynomial_features(x_norm, degree);
        let targets = phi * &coeffs;
        (coeffs, targets)
    }

    #[test]
    fn plant_and_recover_degree2() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(200, 3, |_, _| rng.gen::<f64>());
        let (coeffs, targets) = planted_targets(&x, 2, 3, &mut rng);
        let (fit, mse) = fit_attribute(&x, &targets, 2).unwrap();
        assert!(mse < 1e-10, "mse={mse}");
        let max_err = (fit - coeffs).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(max_err < 1e-6, "max coeff err {max_err}");
    }

    #[test]
    fn constant_attribute_degree1() {
        let x = DMatrix::from_row_slice(4, 3, &[
            0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0,
        ]);
        let targets = DMatrix::from_element(4, 1, 7.5);
        let (fit, mse) = fit_attribute(&x, &targets, 1).unwrap();
        assert!(mse < 1e-20);
        assert!((fit[(0, 0)] - 7.5).abs() < 1e-9);
        for r in 1..4 {
            assert!(fit[(r, 0)].abs() < 1e-9);
        }
    }

    #[test]
    fn single_point_interpolates() {
        let x = DMatrix::from_row_slice(1, 3, &[0.3, 0.4, 0.5]);
        let targets = DMatrix::from_row_slice(1, 2, &[2.0, -3.0]);
        let (_, mse) = fit_attribute(&x, &targets, 3).unwrap();
        assert!(mse < 1e-18, "mse={mse}");
    }

    #[test]
    fn mse_monotone_in_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = DMatrix::from_fn(150, 3, |_, _| rng.gen::<f64>());
        let targets = DMatrix::from_fn(150, 2, |_, _| rng.gen::<f64>());
        let mut prev = f64::INFINITY;
        for d in 1..=5 {
            let (_, mse) = fit_attribute(&x, &targets, d).unwrap();
            assert!(mse <= prev + 1e-12, "d={d}: {mse} > {prev}");
            prev = mse;
        }
    }

    #[test]
    fn degree_cap_rule() {
        // 10-splat cluster: budget max(4, 5) = 5 admits only degree 1
        assert_eq!(degree_cap(10), 1);
        assert_eq!(degree_cap(1), 1);
        assert_eq!(degree_cap(2000), 10);
    }

    fn planted_cluster(
        n: usize,
        degree: usize,
        rng: &mut impl Rng,
    ) -> (Vec<[f64; 3]>, [DMatrix<f64>; 4]) {
        let positions: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let (lo, hi) = normalization_bounds(&positions);
        let x = normalize_positions(&positions, &lo, &hi);
        let dims = [3usize, 4, 1, 48];
        let mut attrs = Vec::new();
        for dim in dims {
            let (_, t) = planted_targets(&x, degree, dim, rng);
            attrs.push(t);
        }
        (positions, attrs.try_into().unwrap())
    }

    #[test]
    fn grid_search_recovers_planted_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (positions, attrs) = planted_cluster(1000, 3, &mut rng);
        let model = grid_search_fit(&positions, &attrs, (0..1000).collect()).unwrap();
        for m in &model.models {
            assert_eq!(m.degree, 3);
        }
        assert!(model.mse_combined < 1e-12);
    }

    #[test]
    fn combined_mse_equal_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (positions, attrs) = planted_cluster(100, 2, &mut rng);
        let model = grid_search_fit(&positions, &attrs, (0..100).collect()).unwrap();
        let expect = model.mse_per_attr.iter().sum::<f64>() * 0.25;
        assert!((model.mse_combined - expect).abs() < 1e-15);
    }

    #[test]
    fn predict_recovers_training_attributes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (positions, attrs) = planted_cluster(400, 2, &mut rng);
        // Keep opacity in (0,1) and quaternions near unit so the output
        // clamps do not bite: rebuild those targets from valid values.
        let mut attrs = attrs;
        for row in 0..400 {
            attrs[2][(row, 0)] = 0.3 + 0.4 * positions[row][0];
            let q = [1.0, 0.2 * positions[row][1], 0.0, 0.0];
            let norm = (q[0] * q[0] + q[1] * q[1]).sqrt();
            for a in 0..4 {
                attrs[1][(row, a)] = q[a] / norm;
            }
            for a in 0..3 {
                attrs[0][(row, a)] = 0.5 + 0.1 * positions[row][a];
            }
        }
        let model = grid_search_fit(&positions, &attrs, (0..400).collect()).unwrap();
        let pred = predict_attributes(&model.models, &positions);
        for row in 0..400 {
            for a in 0..3 {
                assert!((pred.scale[row][a] - attrs[0][(row, a)]).abs() < 1e-5);
            }
            assert!((pred.opacity[row] - attrs[2][(row, 0)]).abs() < 1e-5);
            let qn: f64 = pred.rot_unit[row].iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((qn - 1.0).abs() < 1e-9);
            for a in 0..48 {
                assert!((pred.color[row][a] - attrs[3][(row, a)]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn constant_model_predicts_anywhere() {
        let positions: Vec<[f64; 3]> = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]];
        let n = positions.len();
        let attrs = [
            DMatrix::from_element(n, 3, 2.0),
            DMatrix::from_fn(n, 4, |_, c| if c == 0 { 1.0 } else { 0.0 }),
            DMatrix::from_element(n, 1, 0.25),
            DMatrix::from_element(n, 48, -0.5),
        ];
        let model = grid_search_fit(&positions, &attrs, (0..n).collect()).unwrap();
        let pred = predict_attributes(&model.models, &[[5.0, -3.0, 2.0]]);
        assert!((pred.scale[0][0] - 2.0).abs() < 1e-6);
        assert!((pred.opacity[0] - 0.25).abs() < 1e-6);
        assert!((pred.color[0][7] + 0.5).abs() < 1e-6);
    }
}
