use std::io::{Read, Write};
use std::path::Path;

use super::{WindError, WindField, WindSample};

const MAGIC: &[u8; 4] = b"AWEW";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 * 4 + 8 * 4 + 1;

/// Velocity snapshots on a regular grid.
///
/// Nodes along `z` run from the ground to `lz` inclusive. With `periodic_xy` the
/// horizontal nodes sit at `i * lx / nx` and wrap around; otherwise they span
/// `[0, lx]` inclusive and queries are clamped. Snapshots are spaced `dt_snap`
/// apart and cycle in time unless one is pinned with [`GriddedField::frozen`].
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedField {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub nt: usize,
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    pub dt_snap: f64,
    pub periodic_xy: bool,
    /// `[t][z][y][x][component]`
    data: Vec<f32>,
    frozen: Option<usize>,
}

impl GriddedField {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        nx: usize,
        ny: usize,
        nz: usize,
        nt: usize,
        lx: f64,
        ly: f64,
        lz: f64,
        dt_snap: f64,
        periodic_xy: bool,
        data: Vec<f32>,
    ) -> Result<Self, WindError> {
        if nx < 2 || ny < 2 || nz < 2 || nt < 1 {
            return Err(WindError::Format(format!(
                "grid {nx}x{ny}x{nz} with {nt} snapshots is too small"
            )));
        }
        for (name, v) in [("lx", lx), ("ly", ly), ("lz", lz)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(WindError::Format(format!("{name} = {v} must be positive")));
            }
        }
        if !(dt_snap.is_finite() && (dt_snap > 0.0 || nt == 1)) {
            return Err(WindError::Format(format!("dt_snap = {dt_snap} must be positive")));
        }
        let expected = nt * nz * ny * nx * 3;
        if data.len() != expected {
            return Err(WindError::Format(format!(
                "payload holds {} values, header implies {expected}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(WindError::Data(format!("non-finite value at index {i}")));
        }
        Ok(GriddedField {
            nx,
            ny,
            nz,
            nt,
            lx,
            ly,
            lz,
            dt_snap,
            periodic_xy,
            data,
            frozen: None,
        })
    }

    /// Builds a grid by evaluating `f(x, y, z, t)` at every node.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fn(
        nx: usize,
        ny: usize,
        nz: usize,
        nt: usize,
        lx: f64,
        ly: f64,
        lz: f64,
        dt_snap: f64,
        mut f: impl FnMut(f64, f64, f64, f64) -> [f64; 3],
    ) -> Result<Self, WindError> {
        let mut data = Vec::with_capacity(nt * nz * ny * nx * 3);
        let (dx, dy, dz) = (lx / nx as f64, ly / ny as f64, lz / (nz - 1).max(1) as f64);
        for it in 0..nt {
            for iz in 0..nz {
                for iy in 0..ny {
                    for ix in 0..nx {
                        let v = f(
                            ix as f64 * dx,
                            iy as f64 * dy,
                            iz as f64 * dz,
                            it as f64 * dt_snap,
                        );
                        data.extend(v.iter().map(|&c| c as f32));
                    }
                }
            }
        }
        Self::new(nx, ny, nz, nt, lx, ly, lz, dt_snap, true, data)
    }

    /// Pins sampling to one snapshot regardless of time.
    pub fn frozen(mut self, snapshot: usize) -> Self {
        self.frozen = Some(snapshot % self.nt);
        self
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn node(&self, it: usize, iz: usize, iy: usize, ix: usize) -> [f32; 3] {
        let base = (((it * self.nz + iz) * self.ny + iy) * self.nx + ix) * 3;
        [self.data[base], self.data[base + 1], self.data[base + 2]]
    }

    fn spacing_xy(&self) -> (f64, f64) {
        if self.periodic_xy {
            (self.lx / self.nx as f64, self.ly / self.ny as f64)
        } else {
            (
                self.lx / (self.nx - 1) as f64,
                self.ly / (self.ny - 1) as f64,
            )
        }
    }

    /// Lower node index and weight along one horizontal axis.
    fn locate_xy(&self, coord: f64, extent: f64, spacing: f64, n: usize) -> (usize, usize, f64) {
        if self.periodic_xy {
            let wrapped = coord.rem_euclid(extent);
            let u = wrapped / spacing;
            let i0 = u.floor();
            let w = u - i0;
            let i0 = (i0 as usize) % n;
            (i0, (i0 + 1) % n, w)
        } else {
            locate_clamped(coord.clamp(0.0, extent) / spacing, n)
        }
    }

    fn spatial(&self, it: usize, ix: (usize, usize, f64), iy: (usize, usize, f64), iz: (usize, usize, f64)) -> [f64; 3] {
        let mut out = [0.0; 3];
        let corners = [
            (iz.0, 1.0 - iz.2),
            (iz.1, iz.2),
        ];
        for &(z, wz) in &corners {
            for &(y, wy) in &[(iy.0, 1.0 - iy.2), (iy.1, iy.2)] {
                let a = self.node(it, z, y, ix.0);
                let b = self.node(it, z, y, ix.1);
                for c in 0..3 {
                    let along_x = (1.0 - ix.2) * a[c] as f64 + ix.2 * b[c] as f64;
                    out[c] += wz * wy * along_x;
                }
            }
        }
        out
    }
}

fn locate_clamped(u: f64, n: usize) -> (usize, usize, f64) {
    let i0 = (u.floor() as usize).min(n - 2);
    let w = u - i0 as f64;
    (i0, i0 + 1, w)
}

impl WindField for GriddedField {
    fn sample(&self, x: f64, y: f64, z: f64, t: f64) -> Result<WindSample, WindError> {
        if z < 0.0 {
            return Err(WindError::BelowGround { z });
        }
        if z > self.lz || z.is_nan() {
            return Err(WindError::AboveDomain { z, top: self.lz });
        }
        let (dx, dy) = self.spacing_xy();
        let ix = self.locate_xy(x, self.lx, dx, self.nx);
        let iy = self.locate_xy(y, self.ly, dy, self.ny);
        let iz = locate_clamped(z / (self.lz / (self.nz - 1) as f64), self.nz);

        let (t0, t1, wt) = match self.frozen {
            Some(s) => (s, s, 0.0),
            None if self.nt == 1 => (0, 0, 0.0),
            None => {
                let period = self.nt as f64 * self.dt_snap;
                let u = t.rem_euclid(period) / self.dt_snap;
                let j0 = u.floor();
                let w = u - j0;
                let j0 = (j0 as usize) % self.nt;
                (j0, (j0 + 1) % self.nt, w)
            }
        };
        let a = self.spatial(t0, ix, iy, iz);
        let v = if wt == 0.0 {
            a
        } else {
            let b = self.spatial(t1, ix, iy, iz);
            [0, 1, 2].map(|c| (1.0 - wt) * a[c] + wt * b[c])
        };
        Ok(WindSample::new(v[0], v[1], v[2]))
    }

    fn ceiling(&self) -> Option<f64> {
        Some(self.lz)
    }
}

/// Writes the little-endian `AWEW` v1 format.
pub fn write_gridded(path: &Path, field: &GriddedField) -> Result<(), WindError> {
    let mut buf = Vec::with_capacity(HEADER_LEN + field.data.len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for n in [field.nx, field.ny, field.nz, field.nt] {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for v in [field.lx, field.ly, field.lz, field.dt_snap] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.push(field.periodic_xy as u8);
    for v in &field.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| WindError::Io(e.to_string()))?;
    file.write_all(&buf).map_err(|e| WindError::Io(e.to_string()))
}

pub fn load_gridded(path: &Path) -> Result<GriddedField, WindError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| WindError::Io(format!("{}: {e}", path.display())))?;
    parse_gridded(&bytes)
}

fn parse_gridded(bytes: &[u8]) -> Result<GriddedField, WindError> {
    if bytes.len() < HEADER_LEN {
        return Err(WindError::Format(format!(
            "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(WindError::Format("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(WindError::Format(format!("unsupported version {version}")));
    }
    let [nx, ny, nz, nt] = [8, 12, 16, 20].map(|o| u32_at(o) as usize);
    let [lx, ly, lz, dt_snap] = [24, 32, 40, 48].map(f64_at);
    let periodic_xy = match bytes[56] {
        0 => false,
        1 => true,
        b => return Err(WindError::Format(format!("periodic flag must be 0 or 1, got {b}"))),
    };
    let payload = &bytes[HEADER_LEN..];
    let expected = nt
        .checked_mul(nz)
        .and_then(|v| v.checked_mul(ny))
        .and_then(|v| v.checked_mul(nx))
        .and_then(|v| v.checked_mul(12))
        .ok_or_else(|| WindError::Format("grid dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(WindError::Format(format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GriddedField::new(nx, ny, nz, nt, lx, ly, lz, dt_snap, periodic_xy, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(seed: u64, nt: usize) -> GriddedField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (nx, ny, nz) = (5, 4, 6);
        let data = (0..nt * nz * ny * nx * 3)
            .map(|_| rng.random_range(-5.0f32..25.0))
            .collect();
        GriddedField::new(nx, ny, nz, nt, 100.0, 80.0, 100.0, 2.0, true, data).unwrap()
    }

    fn as_arr(s: WindSample) -> [f64; 3] {
        [s.u, s.v, s.w]
    }

    #[test]
    fn exact_at_nodes() {
        let f = random_field(1, 3);
        for it in 0..3 {
            for iz in 0..6 {
                for iy in 0..4 {
                    for ix in 0..5 {
                        let s = f
                            .sample(ix as f64 * 20.0, iy as f64 * 20.0, iz as f64 * 20.0, it as f64 * 2.0)
                            .unwrap();
                        assert_eq!(as_arr(s), f.node(it, iz, iy, ix).map(|v| v as f64));
                    }
                }
            }
        }
    }

    #[test]
    fn periodic_wrap() {
        let f = random_field(2, 1);
        for n in [-2.0, -1.0, 1.0, 3.0] {
            let a = f.sample(40.0, 20.0, 30.0, 0.0).unwrap();
            let b = f.sample(40.0 + n * 100.0, 20.0 + n * 80.0, 30.0, 0.0).unwrap();
            assert_eq!(a, b);
            let a = f.sample(13.7, 51.2, 30.0, 0.0).unwrap();
            let b = f.sample(13.7 + n * 100.0, 51.2, 30.0, 0.0).unwrap();
            for c in 0..3 {
                assert!((as_arr(a)[c] - as_arr(b)[c]).abs() < 1e-10);
            }
        }
        // last x node wraps onto the first
        let last = f.sample(90.0, 0.0, 0.0, 0.0).unwrap();
        let between = f.sample(95.0, 0.0, 0.0, 0.0).unwrap();
        let first = f.sample(0.0, 0.0, 0.0, 0.0).unwrap();
        assert!((between.u - 0.5 * (last.u + first.u)).abs() < 1e-12);
    }

    #[test]
    fn midpoint_is_mean() {
        let f = random_field(3, 1);
        let a = f.node(0, 2, 1, 1).map(|v| v as f64);
        let b = f.node(0, 2, 1, 2).map(|v| v as f64);
        let s = as_arr(f.sample(30.0, 20.0, 40.0, 0.0).unwrap());
        for c in 0..3 {
            assert!((s[c] - 0.5 * (a[c] + b[c])).abs() < 1e-12);
        }
    }

    #[test]
    fn continuous_across_faces() {
        let f = random_field(4, 2);
        for &x in &[20.0, 40.0, 60.0] {
            let left = as_arr(f.sample(x - 1e-12, 33.0, 47.0, 0.7).unwrap());
            let right = as_arr(f.sample(x + 1e-12, 33.0, 47.0, 0.7).unwrap());
            for c in 0..3 {
                assert!((left[c] - right[c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn time_interpolation_and_cycling() {
        let f = random_field(5, 3);
        let a = f.node(0, 1, 1, 1).map(|v| v as f64);
        let b = f.node(1, 1, 1, 1).map(|v| v as f64);
        let s = as_arr(f.sample(20.0, 20.0, 20.0, 1.0).unwrap());
        for c in 0..3 {
            assert!((s[c] - 0.5 * (a[c] + b[c])).abs() < 1e-12);
        }
        let wrapped = f.sample(20.0, 20.0, 20.0, 6.0).unwrap();
        assert_eq!(as_arr(wrapped), a);
        let frozen = f.clone().frozen(1);
        assert_eq!(as_arr(frozen.sample(20.0, 20.0, 20.0, 123.4).unwrap()), b);
    }

    #[test]
    fn domain_limits() {
        let f = random_field(6, 1);
        assert!(matches!(f.sample(0.0, 0.0, 100.5, 0.0), Err(WindError::AboveDomain { .. })));
        assert!(matches!(f.sample(0.0, 0.0, -0.1, 0.0), Err(WindError::BelowGround { .. })));
        assert!(f.sample(0.0, 0.0, 100.0, 0.0).is_ok());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.awew");
        let f = random_field(7, 2);
        write_gridded(&path, &f).unwrap();
        let g = load_gridded(&path).unwrap();
        assert_eq!(f, g);
        assert!(f.data().iter().zip(g.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.awew");
        write_gridded(&path, &random_field(8, 1)).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let truncated = &bytes[..bytes.len() - 5];
        assert!(matches!(parse_gridded(truncated), Err(WindError::Format(_))));
        assert!(matches!(parse_gridded(&bytes[..20]), Err(WindError::Format(_))));

        let mut wrong_count = bytes.clone();
        wrong_count[8..12].copy_from_slice(&6u32.to_le_bytes());
        assert!(matches!(parse_gridded(&wrong_count), Err(WindError::Format(_))));

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(parse_gridded(&bad_magic), Err(WindError::Format(_))));

        let mut nan = bytes.clone();
        let off = HEADER_LEN + 4 * 7;
        nan[off..off + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(parse_gridded(&nan), Err(WindError::Data(_))));
    }
}
