//! Classical fixed-step RK4 for complex state vectors.

use num_complex::Complex64 as C64;

/// Scratch buffers for [`Rk4::step`], sized once per integration.
pub struct Rk4 {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); dim];
        Rk4 { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }

    /// Advances `y` by `dt` under the autonomous system `dy/dt = f(y)`.
    /// `f(y, out)` writes the derivative into `out`.
    pub fn step<F>(&mut self, y: &mut [C64], dt: f64, mut f: F)
    where
        F: FnMut(&[C64], &mut [C64]),
    {
        debug_assert_eq!(y.len(), self.k1.len());
        let h2 = 0.5 * dt;
        f(y, &mut self.k1);
        for ((t, yi), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *t = yi + k * h2;
        }
        f(&self.tmp, &mut self.k2);
        for ((t, yi), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *t = yi + k * h2;
        }
        f(&self.tmp, &mut self.k3);
        for ((t, yi), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *t = yi + k * dt;
        }
        f(&self.tmp, &mut self.k4);
        let h6 = dt / 6.0;
        for i in 0..y.len() {
            y[i] += (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]) * h6;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_phase_fourth_order() {
        // dy/dt = i w y; error should fall ~16x when dt halves.
        let w = 3.0;
        let err = |dt: f64| {
            let mut y = vec![C64::new(1.0, 0.0)];
            let mut rk = Rk4::new(1);
            let n = (1.0 / dt).round() as usize;
            for _ in 0..n {
                rk.step(&mut y, dt, |y, out| out[0] = C64::new(0.0, w) * y[0]);
            }
            (y[0] - C64::from_polar(1.0, w)).norm()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 / e2 > 14.0 && e1 / e2 < 18.0, "ratio {}", e1 / e2);
    }
}
