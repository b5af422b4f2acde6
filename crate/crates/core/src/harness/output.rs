//! Artifact writers: CSV samples, JSON documents, gnuplot data files.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::inference::ChainOutput;

/// One row per retained sample; columns are the sorted variable names then
/// one 0/1 column per branch predicate.
pub fn write_samples_csv<W: Write>(out: &ChainOutput<f64>, w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = out.names.clone();
    header.extend((0..out.branch_bits).map(|i| format!("branch{i}")));
    wr.write_record(&header)?;
    for (i, s) in out.samples.iter().enumerate() {
        let mut row: Vec<String> = s.iter().map(|v| v.to_string()).collect();
        if let Some(b) = out.branching.get(i) {
            row.extend(b.bits.iter().map(|&t| if t { "1" } else { "0" }.to_string()));
        }
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}

/// Whitespace-separated columns with a `#` header line.
pub fn write_dat(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# {}", header.join(" "))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::BranchingVector;
    use crate::inference::ChainStats;

    #[test]
    fn csv_layout() {
        let out = ChainOutput {
            names: vec!["a".into(), "b".into()],
            samples: vec![vec![0.5, -1.0], vec![0.25, 2.0]],
            branching: vec![BranchingVector { bits: vec![true] }, BranchingVector { bits: vec![false] }],
            branch_bits: 1,
            stats: ChainStats::default(),
        };
        let mut buf = Vec::new();
        write_samples_csv(&out, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b,branch0\n0.5,-1,1\n0.25,2,0\n");
    }

    #[test]
    fn empty_chain_writes_header_only() {
        let out = ChainOutput::<f64> { names: vec!["z1".into()], samples: vec![], branching: vec![], branch_bits: 1, stats: ChainStats::default() };
        let mut buf = Vec::new();
        write_samples_csv(&out, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "z1,branch0\n");
    }
}
