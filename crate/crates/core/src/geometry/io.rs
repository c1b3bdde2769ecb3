//! CSV import of designs and export of tessellation summaries.

use std::io::{Read, Write};

use super::voronoi::Tessellation;
use super::SamplingDesign;
use crate::error::{Error, Result};

/// Reads one site per row. A first row that does not parse as numbers is taken as a header.
pub fn read_design<R: Read>(input: R) -> Result<SamplingDesign> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(p) => points.push(p),
            Err(_) if row == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", row + 1))),
        }
    }
    if points.is_empty() {
        return Err(Error::Parse("design file contains no sites".into()));
    }
    SamplingDesign::from_points(&points)
}

pub fn write_design<W: Write>(design: &SamplingDesign, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for i in 0..design.n() {
        w.write_record(design.point(i).iter().map(|x| format!("{x:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: `site,volume,vertex_count`.
pub fn write_tessellation<W: Write>(tess: &Tessellation, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["site", "volume", "vertex_count"])?;
    for (i, (v, c)) in tess.volumes().iter().zip(tess.cells()).enumerate() {
        w.write_record([i.to_string(), format!("{v:.17e}"), c.vertex_count().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{voronoi, Domain};

    #[test]
    fn design_round_trip_with_header() {
        let text = "x,y\n0.1,0.2\n0.7,0.4\n";
        let d = read_design(text.as_bytes()).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.point(1), &[0.7, 0.4]);
        let mut buf = Vec::new();
        write_design(&d, &mut buf).unwrap();
        assert_eq!(read_design(&buf[..]).unwrap(), d);
    }

    #[test]
    fn bad_row_is_an_error() {
        assert!(read_design("0.1\nabc\n".as_bytes()).is_err());
        assert!(read_design("".as_bytes()).is_err());
    }

    #[test]
    fn tessellation_summary() {
        let d = SamplingDesign::irregular(1, vec![0.25, 0.75]).unwrap();
        let t = voronoi(&d, &Domain::interval(0.0, 1.0).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_tessellation(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("site,volume,vertex_count\n0,5.00000000000000000e-1,2\n"));
    }
}
