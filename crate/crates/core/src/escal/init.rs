use alloc::vec::Vec;

use crate::geometry::{ArrayGeometry, PlaneWaveSource};
use crate::signal::{ChannelSettings, Receiver};
use crate::Result;

/// Spacing of the coarse initialization grid, in codes.
pub const COARSE_STRIDE: u8 = 16;

/// Per-axis coarse sweep.
///
/// Each code is swept over `nominal + k * stride` (wrapping) with the others
/// held at nominal; the best grid point of each axis forms the result.
/// Ties keep the point closest to nominal.
pub fn coarse_init<F>(nominal: &[u8], stride: u8, mut objective: F) -> Result<Vec<u8>>
where
    F: FnMut(&[u8]) -> Result<f64>,
{
    let stride = stride.max(1);
    let steps = 256u32.div_ceil(u32::from(stride));
    let mut out = nominal.to_vec();
    let mut probe = nominal.to_vec();
    for axis in 0..nominal.len() {
        let mut best = (nominal[axis], f64::NEG_INFINITY);
        for k in 0..steps {
            let code = nominal[axis].wrapping_add((k * u32::from(stride)) as u8);
            probe[axis] = code;
            let v = objective(&probe)?;
            if v > best.1 {
                best = (code, v);
            }
        }
        probe[axis] = nominal[axis];
        out[axis] = best.0;
    }
    Ok(out)
}

/// Initial phase codes for every element, the reference element held at 0.
///
/// Starts from the codes that steer a flat array toward the source and
/// refines each non-reference element with [`coarse_init`] on the noise-free
/// combined magnitude.
pub fn init_phase_codes(
    geom: &ArrayGeometry,
    src: &PlaneWaveSource,
    rx: &Receiver,
) -> Result<Vec<u8>> {
    let flat = ArrayGeometry::tile(geom.rows(), geom.columns(), geom.spacing(), f64::INFINITY)?;
    let nominal = rx.steering_codes(&flat, src);
    let base = ChannelSettings::default();
    let mut full = nominal.clone();
    let tail = coarse_init(&nominal[1..], COARSE_STRIDE, |codes| {
        full[1..].copy_from_slice(codes);
        rx.coherent_magnitude(geom, src, &base, &full)
    })?;
    let mut codes = Vec::with_capacity(nominal.len());
    codes.push(nominal[0]);
    codes.extend(tail);
    Ok(codes)
}
