// temporary probe
use nonlocal_lab::curvature::{directional_curvature, es2_curvature, CurvQuad, GraphSurface};

fn main() {
    let surf = GraphSurface::new(3, |xp: &[f64]| 8.0 * xp[0] * xp[0] * xp[1] * xp[1], 1.0, 0.0).unwrap();
    let s = 0.3;
    for &m in &[64usize, 128] {
        let mut acc = 0.0;
        for k in 0..m {
            let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / m as f64;
            acc += directional_curvature(&surf, &[th.cos(), th.sin()], s, &CurvQuad::default()).unwrap().value;
        }
        println!("avg m={m}: {:.10}", acc / m as f64);
    }
    for &th in &[0.01f64, 0.05, 0.2, 0.39269908169872414, 0.7853981633974483] {
        let v = directional_curvature(&surf, &[th.cos(), th.sin()], s, &CurvQuad::default()).unwrap();
        let fine = directional_curvature(&surf, &[th.cos(), th.sin()], s, &CurvQuad { inner_levels: 60, far_factor: 64.0, gauss_order: 20 }).unwrap();
        let reduced = es2_curvature(th, s).unwrap();
        println!("theta={th:.4}: K={:.8} (err {:.1e})  fine={:.8}  reduced={:.8}", v.value, v.err_est, fine.value, reduced);
    }
}
