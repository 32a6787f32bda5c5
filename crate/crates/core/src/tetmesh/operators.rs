//! P1 finite-element operators on a tet mesh.

use alloc::vec::Vec;

use super::{TetMesh, TET_EDGES};
use crate::anisotropy::TensorField;
use crate::error::{Error, Result};
use crate::math::{abs, signed_volume, Mat3, Vec3};
use crate::sparse::SparseOperator;

/// Gradients of the four barycentric hat functions of tet `t`, plus its volume.
pub fn tet_basis_gradients(mesh: &TetMesh, t: usize) -> Result<([Vec3; 4], f64)> {
    basis_gradients(&mesh.tet_points(t)).ok_or(Error::DegenerateTet(t))
}

fn basis_gradients(p: &[Vec3; 4]) -> Option<([Vec3; 4], f64)> {
    let vol = signed_volume(p[0], p[1], p[2], p[3]);
    let scale = (p[1] - p[0]).norm().max((p[2] - p[0]).norm()).max((p[3] - p[0]).norm());
    if !(abs(vol) > 1e-14 * scale * scale * scale) {
        return None;
    }
    // Rows of the inverse edge matrix are the gradients of phi_1..phi_3.
    let e = Mat3::from_cols(p[1] - p[0], p[2] - p[0], p[3] - p[0]);
    let inv = e.inverse()?;
    let g1 = inv.row(0);
    let g2 = inv.row(1);
    let g3 = inv.row(2);
    let g0 = -(g1 + g2 + g3);
    Some(([g0, g1, g2, g3], abs(vol)))
}

/// `(3|T|) x |V|` operator mapping vertex values to per-tet constant
/// gradients; row `3t + c` is component `c` of tet `t`.
pub fn gradient_operator(mesh: &TetMesh) -> Result<SparseOperator> {
    let mut trip = Vec::with_capacity(mesh.num_tets() * 12);
    for t in 0..mesh.num_tets() {
        let (g, _) = tet_basis_gradients(mesh, t)?;
        let tet = mesh.tet(t);
        for k in 0..4 {
            for c in 0..3 {
                trip.push((3 * t + c, tet[k], g[k][c]));
            }
        }
    }
    Ok(SparseOperator::from_triplets(3 * mesh.num_tets(), mesh.num_vertices(), trip))
}

/// Diagonal `(3|T|) x (3|T|)` operator carrying each tet's volume three times.
pub fn mass_operator(mesh: &TetMesh) -> SparseOperator {
    let n = mesh.num_tets();
    SparseOperator::from_triplets(
        3 * n,
        3 * n,
        (0..n).flat_map(|t| {
            let v = mesh.tet_volume(t);
            (0..3).map(move |c| (3 * t + c, 3 * t + c, v))
        }),
    )
}

/// Isotropic stiffness matrix assembled edge by edge from dihedral angles:
/// the entry for edge `ij` collects `-l_kl cot(theta_kl) / 6` over the tets
/// around it, where `kl` is the opposite edge. Symmetric positive
/// semidefinite with zero row sums.
pub fn cotan_laplacian(mesh: &TetMesh) -> Result<SparseOperator> {
    let mut trip = Vec::with_capacity(mesh.num_tets() * 16);
    for t in 0..mesh.num_tets() {
        let p = mesh.tet_points(t);
        if basis_gradients(&p).is_none() {
            return Err(Error::DegenerateTet(t));
        }
        let tet = mesh.tet(t);
        let mut diag = [0.0; 4];
        for [i, j] in TET_EDGES {
            let (k, l) = opposite_edge(i, j);
            let w = -opposite_edge_weight(&p, i, j, k, l);
            trip.push((tet[i], tet[j], w));
            trip.push((tet[j], tet[i], w));
            diag[i] -= w;
            diag[j] -= w;
        }
        for k in 0..4 {
            trip.push((tet[k], tet[k], diag[k]));
        }
    }
    let n = mesh.num_vertices();
    Ok(SparseOperator::from_triplets(n, n, trip))
}

fn opposite_edge(i: usize, j: usize) -> (usize, usize) {
    let mut rest = (0..4).filter(|&x| x != i && x != j);
    (rest.next().unwrap(), rest.next().unwrap())
}

/// `l_kl cot(theta_kl) / 6`, the dihedral angle measured at edge `kl`
/// between the faces `kli` and `klj`.
fn opposite_edge_weight(p: &[Vec3; 4], i: usize, j: usize, k: usize, l: usize) -> f64 {
    let axis = p[l] - p[k];
    let len = axis.norm();
    let e = axis / len;
    let u = p[i] - p[k];
    let w = p[j] - p[k];
    let u = u - e * u.dot(e);
    let w = w - e * w.dot(e);
    let cot = u.dot(w) / u.cross(w).norm();
    len * cot / 6.0
}

/// `G^T M A G` for per-tet SPD tensors `A`.
pub fn anisotropic_laplacian(mesh: &TetMesh, tensors: &TensorField) -> Result<SparseOperator> {
    if tensors.len() != mesh.num_tets() {
        return Err(Error::InvalidInput(alloc::format!(
            "tensor field has {} entries for {} tets",
            tensors.len(),
            mesh.num_tets()
        )));
    }
    for t in 0..mesh.num_tets() {
        if !tensors.is_spd(t) {
            return Err(Error::NonSpdTensor(t));
        }
    }
    stiffness_from_tensors(mesh, |t| tensors.get(t))
}

/// Per-tet `vol * grad(phi_a)^T A grad(phi_b)` assembly.
pub fn stiffness_from_tensors<F>(mesh: &TetMesh, tensor: F) -> Result<SparseOperator>
where
    F: Fn(usize) -> Mat3,
{
    let mut trip = Vec::with_capacity(mesh.num_tets() * 16);
    for t in 0..mesh.num_tets() {
        let (g, vol) = tet_basis_gradients(mesh, t)?;
        let a = tensor(t);
        let tet = mesh.tet(t);
        let ag = g.map(|gi| a.mul_vec(gi));
        for i in 0..4 {
            for j in 0..4 {
                trip.push((tet[i], tet[j], vol * g[i].dot(ag[j])));
            }
        }
    }
    let n = mesh.num_vertices();
    Ok(SparseOperator::from_triplets(n, n, trip))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenes::{cube_grid, jittered_cube_grid, unit_cube_six_tets};
    use alloc::vec;

    fn unit_regular_tet() -> TetMesh {
        let s = 1.0 / crate::math::sqrt(2.0);
        TetMesh::from_geometry(
            vec![
                Vec3::new(1.0, 0.0, -s),
                Vec3::new(-1.0, 0.0, -s),
                Vec3::new(0.0, 1.0, s),
                Vec3::new(0.0, -1.0, s),
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let m = cube_grid(2, 1.0);
        let g = gradient_operator(&m).unwrap();
        let out = g.mul_vec(&vec![3.5; m.num_vertices()]);
        assert!(out.iter().all(|v| abs(*v) < 1e-12));
    }

    #[test]
    fn x_coordinate_gradient_on_regular_tet() {
        let m = unit_regular_tet();
        let g = gradient_operator(&m).unwrap();
        let f: Vec<f64> = m.vertices().iter().map(|v| v.x()).collect();
        let out = g.mul_vec(&f);
        assert!((out[0] - 1.0).abs() < 1e-12 && out[1].abs() < 1e-12 && out[2].abs() < 1e-12);
    }

    #[test]
    fn affine_field_reproduced_on_jittered_mesh() {
        let m = jittered_cube_grid(2, 1.0, 0.15, 7);
        let g = gradient_operator(&m).unwrap();
        let f: Vec<f64> = m.vertices().iter().map(|v| 2.0 * v.x() - 3.0 * v.y() + v.z() + 0.5).collect();
        let out = g.mul_vec(&f);
        for t in 0..m.num_tets() {
            assert!((out[3 * t] - 2.0).abs() < 1e-10);
            assert!((out[3 * t + 1] + 3.0).abs() < 1e-10);
            assert!((out[3 * t + 2] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn cotan_matches_gradient_route() {
        let m = unit_cube_six_tets();
        let l = cotan_laplacian(&m).unwrap();
        let g = gradient_operator(&m).unwrap();
        let gtmg = g.transpose().mul(&mass_operator(&m)).mul(&g);
        assert!(l.max_abs_diff(&gtmg) < 1e-10);
        let jm = jittered_cube_grid(2, 1.0, 0.2, 3);
        let l = cotan_laplacian(&jm).unwrap();
        let g = gradient_operator(&jm).unwrap();
        let gtmg = g.transpose().mul(&mass_operator(&jm)).mul(&g);
        assert!(l.max_abs_diff(&gtmg) < 1e-10);
    }

    #[test]
    fn single_tet_laplacian_is_psd() {
        let m = unit_regular_tet();
        let l = cotan_laplacian(&m).unwrap();
        assert!(l.is_symmetric(1e-14));
        let (w, _) = dense_sym_eigenvalues(&l.to_dense());
        assert!(w.iter().all(|&x| x >= -1e-12), "{w:?}");
        assert!(l.row_sums().iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn degenerate_tet_is_reported() {
        let m = TetMesh::from_raw_unchecked(
            vec![Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::new(1.0, 1.0, 0.0)],
            vec![[0, 1, 2, 3]],
        );
        assert_eq!(gradient_operator(&m).unwrap_err(), Error::DegenerateTet(0));
        assert_eq!(cotan_laplacian(&m).unwrap_err(), Error::DegenerateTet(0));
    }

    /// Jacobi eigenvalues of a small dense symmetric matrix.
    fn dense_sym_eigenvalues(a: &[Vec<f64>]) -> (Vec<f64>, ()) {
        let n = a.len();
        let mut a: Vec<Vec<f64>> = a.to_vec();
        for _ in 0..200 {
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        ((0..n).map(|i| a[i][i]).collect(), ())
    }
}
