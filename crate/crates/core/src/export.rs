//! JSON and CSV emission. Every JSON document carries `"schemaVersion": 1`.

use std::io::Write;

use num_complex::Complex;
use serde::ser::{SerializeSeq, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::dynamics::Trajectory;
use crate::error::Result;
use crate::oracle::OracleRun;
use crate::problems::{gradient_at, Objective};
use crate::scalar::Real;

pub const SCHEMA_VERSION: u32 = 1;

/// Serializes complex numbers as `{"re": .., "im": ..}` objects.
pub fn complex_list<T: Real, S: Serializer>(v: &[Complex<T>], s: S) -> Result<S::Ok, S::Error> {
    struct Item<'a, T>(&'a Complex<T>);
    impl<T: Real> Serialize for Item<'_, T> {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            let mut st = s.serialize_struct("ComplexScalar", 2)?;
            st.serialize_field("re", &self.0.re)?;
            st.serialize_field("im", &self.0.im)?;
            st.end()
        }
    }
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for c in v {
        seq.serialize_element(&Item(c))?;
    }
    seq.end()
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Envelope<'a, B: Serialize> {
    schema_version: u32,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a B,
}

/// Pretty JSON with the schema header; `body` must serialize as a map.
pub fn to_json<B: Serialize>(kind: &str, body: &B) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        schema_version: SCHEMA_VERSION,
        kind,
        body,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<B: Serialize, W: Write>(w: W, kind: &str, body: &B) -> Result<()> {
    let mut w = w;
    w.write_all(to_json(kind, body)?.as_bytes())?;
    Ok(())
}

/// Trajectory rows `t, x1.., y1.., grad_norm`.
pub fn write_trajectory_csv<T: Real, W: Write>(w: W, f: &dyn Objective<T>, traj: &Trajectory<T>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=f.dim_x()).map(|i| format!("x{i}")));
    header.extend((1..=f.dim_y()).map(|i| format!("y{i}")));
    header.push("grad_norm".to_string());
    out.write_record(&header)?;
    for (k, p) in traj.points.iter().enumerate() {
        let mut row = vec![traj.time(k).to_string()];
        row.extend(p.x.iter().chain(&p.y).map(|v| v.to_string()));
        let gn = gradient_at(f, p).map(|g| g.norm().to_string()).unwrap_or_else(|_| "NaN".into());
        row.push(gn);
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Outer-iterate rows `t, x1.., phi, grad_x_norm`.
pub fn write_oracle_csv<T: Real, W: Write>(w: W, run: &OracleRun<T>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let dx = run.x_bar.len();
    let mut header = vec!["t".to_string()];
    header.extend((1..=dx).map(|i| format!("x{i}")));
    header.push("phi".to_string());
    header.push("grad_x_norm".to_string());
    out.write_record(&header)?;
    for (t, it) in run.iterates.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(it.x.iter().map(|v| v.to_string()));
        row.push(it.phi.to_string());
        row.push(it.grad_x_norm.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_carries_schema_version() {
        #[derive(Serialize)]
        struct Body {
            value: f64,
        }
        let s = to_json("demo", &Body { value: 0.1 }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["schemaVersion"], 1);
        assert_eq!(v["kind"], "demo");
        assert_eq!(v["value"].as_f64().unwrap().to_bits(), 0.1f64.to_bits());
    }

    #[test]
    fn complex_serialization_shape() {
        #[derive(Serialize)]
        struct W {
            #[serde(serialize_with = "complex_list")]
            e: Vec<Complex<f64>>,
        }
        let s = serde_json::to_string(&W {
            e: vec![Complex::new(1.0, -2.0)],
        })
        .unwrap();
        assert_eq!(s, r#"{"e":[{"re":1.0,"im":-2.0}]}"#);
    }
}
