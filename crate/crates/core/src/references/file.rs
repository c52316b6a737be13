//! Plain-text CSV trajectory format.
//!
//! One header row followed by one setpoint per row, values printed with 17
//! significant digits so a save/load round trip is exact. Fields not in the
//! format (angular acceleration, biases) load as zero; `f1..f4` load into
//! both the setpoint input and the state's desired/actual thrusts.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3, Vector4};

use super::{ReferenceError, SampledTrajectory};
use crate::state::{Actuation, Command, QuadState, Setpoint};

pub const TRAJECTORY_HEADER: &str =
    "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,ax,ay,az,jx,jy,jz,sx,sy,sz,f1,f2,f3,f4";
const COLUMNS: usize = 27;

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// The 27 trajectory columns of one state, in header order.
pub(crate) fn state_columns(s: &QuadState, thrusts: &Vector4<f64>) -> [f64; COLUMNS] {
    let q = s.q.quaternion();
    let mut row = [0.0; COLUMNS];
    row[0] = s.t;
    row[1..4].copy_from_slice(s.p.as_slice());
    row[4..8].copy_from_slice(&[q.w, q.i, q.j, q.k]);
    row[8..11].copy_from_slice(s.v.as_slice());
    row[11..14].copy_from_slice(s.w.as_slice());
    row[14..17].copy_from_slice(s.a.as_slice());
    row[17..20].copy_from_slice(s.j.as_slice());
    row[20..23].copy_from_slice(s.s.as_slice());
    row[23..27].copy_from_slice(thrusts.as_slice());
    row
}

pub(crate) fn join_row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_f64).collect::<Vec<_>>().join(",")
}

pub fn trajectory_save<W: Write>(traj: &SampledTrajectory, out: W) -> Result<(), ReferenceError> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for sp in traj.setpoints() {
        let thrusts = match sp.input.actuation {
            Actuation::Thrusts(f) => f,
            Actuation::CollectiveThrustBodyrate { .. } => sp.state.fd,
        };
        writeln!(out, "{}", join_row(state_columns(&sp.state, &thrusts)))?;
    }
    out.flush()?;
    Ok(())
}

pub fn trajectory_save_file(traj: &SampledTrajectory, path: impl AsRef<Path>) -> Result<(), ReferenceError> {
    trajectory_save(traj, File::create(path)?)
}

pub fn trajectory_load<R: Read>(input: R) -> Result<SampledTrajectory, ReferenceError> {
    let parse_err = |line: usize, message: String| ReferenceError::Parse { line, message };
    let reader = BufReader::new(input);
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l?,
        None => return Err(parse_err(1, "empty file, expected header".into())),
    };
    if header.trim_end_matches('\r') != TRAJECTORY_HEADER {
        return Err(parse_err(1, format!("malformed header, expected '{TRAJECTORY_HEADER}'")));
    }
    let mut setpoints: Vec<Setpoint> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != COLUMNS {
            return Err(parse_err(line_no, format!("expected {COLUMNS} columns, found {}", fields.len())));
        }
        let mut v = [0.0; COLUMNS];
        for (i, (slot, text)) in v.iter_mut().zip(&fields).enumerate() {
            *slot = text
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(line_no, format!("column {}: {e}", i + 1)))?;
            if !slot.is_finite() {
                return Err(parse_err(line_no, format!("column {}: value is not finite", i + 1)));
            }
        }
        if let Some(prev) = setpoints.last() {
            if !(v[0] > prev.state.t) {
                return Err(parse_err(
                    line_no,
                    format!("timestamp {} does not increase (previous {})", v[0], prev.state.t),
                ));
            }
        }
        let raw_q = Quaternion::new(v[4], v[5], v[6], v[7]);
        if raw_q.norm() < 1e-6 {
            return Err(parse_err(line_no, "zero quaternion".into()));
        }
        let v3 = |i: usize| Vector3::new(v[i], v[i + 1], v[i + 2]);
        let thrusts = Vector4::new(v[23], v[24], v[25], v[26]);
        let state = QuadState {
            t: v[0],
            p: v3(1),
            q: UnitQuaternion::new_unchecked(raw_q),
            v: v3(8),
            w: v3(11),
            a: v3(14),
            j: v3(17),
            s: v3(20),
            fd: thrusts,
            f: thrusts,
            ..QuadState::default()
        };
        setpoints.push(Setpoint::new(state, Command::thrusts(v[0], thrusts)));
    }
    if setpoints.len() < 2 {
        return Err(parse_err(setpoints.len() + 1, "a trajectory needs at least 2 setpoints".into()));
    }
    SampledTrajectory::new(setpoints)
}

pub fn trajectory_load_file(path: impl AsRef<Path>) -> Result<SampledTrajectory, ReferenceError> {
    trajectory_load(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QuadrotorModel;
    use crate::references::generate_circle;

    #[test]
    fn circle_round_trip_is_exact() {
        let m = QuadrotorModel::default();
        let tr = generate_circle([0.0, 0.0], 4.0, 5.0, 1.0, 1.0, &m).unwrap();
        let mut buf = Vec::new();
        trajectory_save(&tr, &mut buf).unwrap();
        let back = trajectory_load(buf.as_slice()).unwrap();
        assert_eq!(back.len(), tr.len());
        for (a, b) in tr.setpoints().iter().zip(back.setpoints()) {
            assert_eq!(a.state.t.to_bits(), b.state.t.to_bits());
            assert!((a.state.p - b.state.p).amax() <= 1e-12);
            assert!((a.state.q.coords - b.state.q.coords).amax() <= 1e-12);
            assert!((a.state.w - b.state.w).amax() <= 1e-12);
            assert!((a.state.fd - b.state.fd).amax() <= 1e-12);
        }
    }

    #[test]
    fn minimal_hand_written_file() {
        let row0 = "0,0,0,0,1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1.839375,1.839375,1.839375,1.839375";
        let row1 = "0.01,0,0,0,1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1.839375,1.839375,1.839375,1.839375";
        let text = format!("{TRAJECTORY_HEADER}\n{row0}\n{row1}\n");
        let tr = trajectory_load(text.as_bytes()).unwrap();
        assert_eq!(tr.len(), 2);
        for sp in tr.setpoints() {
            assert_eq!(sp.state.p, Vector3::zeros());
            assert_eq!(sp.state.q, UnitQuaternion::identity());
            assert_eq!(sp.input.single_rotor_thrusts().unwrap(), Vector4::repeat(1.839375));
        }
    }

    #[test]
    fn decreasing_timestamp_names_line() {
        let row = |t: f64| format!("{t},0,0,0,1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1,1,1,1");
        let text = format!("{TRAJECTORY_HEADER}\n{}\n{}\n{}\n", row(0.0), row(0.02), row(0.01));
        match trajectory_load(text.as_bytes()) {
            Err(ReferenceError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs_rejected_with_location() {
        let good = "0,0,0,0,1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1,1,1,1";
        let cases = [
            ("t,px\n".to_string(), 1),
            (format!("{TRAJECTORY_HEADER}\n{good}\n0.1,0,0\n"), 3),
            (format!("{TRAJECTORY_HEADER}\n{good}\n{}\n", good.replacen('0', "0.1x", 1)), 3),
            (format!("{TRAJECTORY_HEADER}\n{good}\n"), 2),
        ];
        for (text, expected) in cases {
            match trajectory_load(text.as_bytes()) {
                Err(ReferenceError::Parse { line, .. }) => assert_eq!(line, expected, "{text}"),
                other => panic!("expected parse error, got {other:?}"),
            }
        }
    }
}
