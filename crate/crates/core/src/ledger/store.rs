//! On-disk ledger: `records.bin` holds length-prefixed canonical records,
//! `roots.journal` one `size root-hex` line per prefix.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::log::Ledger;
use super::records::QueryRecord;
use crate::digest::Digest;
use crate::error::{Error, Result};

pub const RECORDS_FILE: &str = "records.bin";
pub const JOURNAL_FILE: &str = "roots.journal";

/// Appends records to both files as they enter the ledger.
#[derive(Debug)]
pub struct LedgerWriter {
    records: BufWriter<File>,
    journal: BufWriter<File>,
}

impl LedgerWriter {
    /// Create fresh files in `dir`, writing the empty-tree root first.
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let open = |p: PathBuf| OpenOptions::new().create(true).write(true).truncate(true).open(p);
        let mut w = LedgerWriter {
            records: BufWriter::new(open(dir.join(RECORDS_FILE))?),
            journal: BufWriter::new(open(dir.join(JOURNAL_FILE))?),
        };
        w.journal_line(0, &Ledger::new().root())?;
        Ok(w)
    }

    fn journal_line(&mut self, size: u64, root: &Digest) -> Result<()> {
        writeln!(self.journal, "{size} {root}")?;
        Ok(())
    }

    pub fn append(&mut self, ledger: &mut Ledger, record: QueryRecord) -> Result<(Digest, u64)> {
        let bytes = record.canonical_bytes();
        let (root, pos) = ledger.append(record)?;
        self.records.write_all(&(bytes.len() as u64).to_be_bytes())?;
        self.records.write_all(&bytes)?;
        self.journal_line(pos + 1, &root)?;
        Ok((root, pos))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.records.flush()?;
        self.journal.flush()?;
        Ok(())
    }
}

impl Drop for LedgerWriter {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

/// Write a whole ledger to `dir`.
pub fn save_ledger(ledger: &Ledger, dir: &Path) -> Result<()> {
    let mut w = LedgerWriter::create(dir)?;
    let mut copy = Ledger::new();
    for r in ledger.records() {
        w.append(&mut copy, r.clone())?;
    }
    w.flush()
}

/// Read a ledger back and check every journal root against the rebuilt tree.
pub fn load_ledger(dir: &Path) -> Result<Ledger> {
    let mut buf = Vec::new();
    File::open(dir.join(RECORDS_FILE))?.read_to_end(&mut buf)?;
    let mut ledger = Ledger::new();
    let mut at = 0;
    while at < buf.len() {
        if buf.len() - at < 8 {
            return Err(Error::Ledger("truncated record length".into()));
        }
        let len = u64::from_be_bytes(buf[at..at + 8].try_into().unwrap()) as usize;
        at += 8;
        if buf.len() - at < len {
            return Err(Error::Ledger("truncated record body".into()));
        }
        ledger.append(QueryRecord::from_canonical_bytes(&buf[at..at + len])?)?;
        at += len;
    }
    let journal = BufReader::new(File::open(dir.join(JOURNAL_FILE))?);
    let mut lines = 0u64;
    for line in journal.lines() {
        let line = line?;
        let (size, root) = line
            .split_once(' ')
            .ok_or_else(|| Error::Ledger(format!("bad journal line {line:?}")))?;
        let size: usize = size
            .parse()
            .map_err(|_| Error::Ledger(format!("bad journal size in {line:?}")))?;
        let root = Digest::from_hex(root)?;
        if ledger.root_at(size) != Some(root) {
            return Err(Error::Ledger(format!("journal root for size {size} does not match the records")));
        }
        lines += 1;
    }
    if lines != ledger.len() as u64 + 1 {
        return Err(Error::Ledger(format!(
            "journal has {lines} lines for {} records",
            ledger.len()
        )));
    }
    Ok(ledger)
}
