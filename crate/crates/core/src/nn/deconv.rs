//! Transposed 2D convolution on channel-major tensors.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct ConvTranspose<'a, T> {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// `[in][out][ky][kx]`.
    pub weight: &'a [T],
    pub bias: &'a [T],
}

impl<T: Scalar> ConvTranspose<'_, T> {
    pub fn output_side(&self, input: usize) -> usize {
        (input - 1) * self.stride + self.kernel - 2 * self.padding
    }

    #[inline]
    fn target(&self, i: usize, k: usize, out_side: usize) -> Option<usize> {
        (i * self.stride + k).checked_sub(self.padding).filter(|&o| o < out_side)
    }

    /// `input` is `[cin][side][side]`; returns `[cout][out][out]`.
    pub fn forward(&self, input: &[T], side: usize) -> Vec<T> {
        let os = self.output_side(side);
        let k = self.kernel;
        let mut out = vec![T::zero(); self.cout * os * os];
        for (co, plane) in out.chunks_exact_mut(os * os).enumerate() {
            plane.iter_mut().for_each(|v| *v = self.bias[co]);
        }
        for ci in 0..self.cin {
            for iy in 0..side {
                for ix in 0..side {
                    let v = input[(ci * side + iy) * side + ix];
                    if v == T::zero() {
                        continue;
                    }
                    for co in 0..self.cout {
                        let wbase = (ci * self.cout + co) * k * k;
                        for ky in 0..k {
                            let Some(oy) = self.target(iy, ky, os) else { continue };
                            let row = (co * os + oy) * os;
                            for kx in 0..k {
                                if let Some(ox) = self.target(ix, kx, os) {
                                    out[row + ox] += v * self.weight[wbase + ky * k + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Returns the input gradient and accumulates weight and bias gradients.
    pub fn backward(&self, input: &[T], side: usize, grad_out: &[T], grad_w: &mut [T], grad_b: &mut [T]) -> Vec<T> {
        let os = self.output_side(side);
        let k = self.kernel;
        for (co, plane) in grad_out.chunks_exact(os * os).enumerate() {
            grad_b[co] += plane.iter().copied().sum::<T>();
        }
        let mut grad_in = vec![T::zero(); input.len()];
        for ci in 0..self.cin {
            for iy in 0..side {
                for ix in 0..side {
                    let at = (ci * side + iy) * side + ix;
                    let v = input[at];
                    let mut gi = T::zero();
                    for co in 0..self.cout {
                        let wbase = (ci * self.cout + co) * k * k;
                        for ky in 0..k {
                            let Some(oy) = self.target(iy, ky, os) else { continue };
                            let row = (co * os + oy) * os;
                            for kx in 0..k {
                                if let Some(ox) = self.target(ix, kx, os) {
                                    let g = grad_out[row + ox];
                                    gi += g * self.weight[wbase + ky * k + kx];
                                    grad_w[wbase + ky * k + kx] += g * v;
                                }
                            }
                        }
                    }
                    grad_in[at] = gi;
                }
            }
        }
        grad_in
    }
}
