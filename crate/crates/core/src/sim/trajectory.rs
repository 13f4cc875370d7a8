use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One control step of a rollout, as written to trajectory logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub time_s: f64,
    pub gripper_x: f64,
    pub gripper_z: f64,
    pub x_c: f64,
    pub f_x: f64,
    pub touched: bool,
    /// Empty in the CSV until the layers touched.
    pub d_if_touched: Option<f64>,
}

/// CSV writer for trajectory logs; the header row is always written.
pub struct TrajectoryWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        inner.write_record(["time_s", "gripper_x", "gripper_z", "x_c", "f_x", "touched", "d_if_touched"])?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, rec: &TrajectoryRecord) -> Result<()> {
        self.inner.serialize(rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(|e| crate::error::Error::io("<trajectory>", e))?;
        self.inner
            .into_inner()
            .map_err(|e| crate::error::Error::io("<trajectory>", e.into_error()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_optional_displacement() {
        let mut w = TrajectoryWriter::new(Vec::new()).unwrap();
        w.write(&TrajectoryRecord {
            time_s: 0.05,
            gripper_x: 0.5,
            gripper_z: 0.1,
            x_c: 0.4,
            f_x: -0.25,
            touched: false,
            d_if_touched: None,
        })
        .unwrap();
        w.write(&TrajectoryRecord {
            time_s: 0.1,
            gripper_x: 0.5,
            gripper_z: 0.1,
            x_c: 0.4,
            f_x: 0.0,
            touched: true,
            d_if_touched: Some(-0.01),
        })
        .unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "time_s,gripper_x,gripper_z,x_c,f_x,touched,d_if_touched");
        assert_eq!(lines[1], "0.05,0.5,0.1,0.4,-0.25,false,");
        assert_eq!(lines[2], "0.1,0.5,0.1,0.4,0.0,true,-0.01");
    }
}
