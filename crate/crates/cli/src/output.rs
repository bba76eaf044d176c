//! Keyed CSV output that survives interruption.
//!
//! Finished rows are appended as they complete. A rerun with the same header
//! keeps every complete row already on disk, computes only the missing keys,
//! and finally rewrites the file in key order, so the result is identical to
//! an uninterrupted run.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

pub struct KeyedTable<K> {
    /// Comment lines and the column line, each newline-terminated.
    pub header: String,
    pub keys: Vec<K>,
    /// Recovers the key from a CSV row.
    pub key_of: fn(&str) -> Option<K>,
}

impl<K: Ord + Clone + Send + Sync> KeyedTable<K> {
    fn columns(&self) -> usize {
        self.header.lines().last().map_or(0, |l| l.split(',').count())
    }

    /// Complete rows of an existing file whose header matches.
    fn recover(&self, path: &Path) -> Result<BTreeMap<K, String>> {
        let mut done = BTreeMap::new();
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(done),
            Err(e) => return Err(e).with_context(|| format!("opening {}", path.display())),
        };
        let mut reader = BufReader::new(file);
        let mut head = String::new();
        for _ in 0..self.header.lines().count() {
            if reader.read_line(&mut head)? == 0 {
                break;
            }
        }
        if head.is_empty() {
            return Ok(done);
        }
        if head != self.header {
            bail!(
                "{} exists with different parameters; remove it or choose another --out",
                path.display()
            );
        }
        let columns = self.columns();
        let mut line = String::new();
        while reader.read_line(&mut line)? > 0 {
            // A row without its newline was cut off mid-write.
            if let Some(row) = line.strip_suffix('\n') {
                if row.split(',').count() == columns {
                    if let Some(k) = (self.key_of)(row) {
                        if self.keys.binary_search(&k).is_ok() {
                            done.insert(k, row.to_owned());
                        }
                    }
                }
            }
            line.clear();
        }
        Ok(done)
    }

    /// Computes every missing row and writes the sorted table to `path`, or
    /// to stdout when `path` is `None`.
    pub fn run<F>(mut self, path: Option<&Path>, compute: F) -> Result<usize>
    where
        F: Fn(&K) -> Result<String> + Sync,
    {
        self.keys.sort();
        self.keys.dedup();
        let Some(path) = path else {
            let rows: Vec<String> = self.keys.par_iter().map(&compute).collect::<Result<_>>()?;
            let mut out = io::stdout().lock();
            out.write_all(self.header.as_bytes())?;
            for r in &rows {
                writeln!(out, "{r}")?;
            }
            return Ok(rows.len());
        };

        let mut done = self.recover(path)?;
        let todo: Vec<K> = self.keys.iter().filter(|k| !done.contains_key(k)).cloned().collect();

        let journal = {
            let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            f.write_all(self.header.as_bytes())?;
            for row in done.values() {
                writeln!(f, "{row}")?;
            }
            f.flush()?;
            Mutex::new(OpenOptions::new().append(true).open(path)?)
        };

        let fresh: Vec<(K, String)> = todo
            .par_iter()
            .map(|k| {
                let row = compute(k)?;
                let mut f = journal.lock().expect("journal lock");
                writeln!(f, "{row}")?;
                f.flush()?;
                Ok((k.clone(), row))
            })
            .collect::<Result<_>>()?;
        drop(journal);
        let computed = fresh.len();
        done.extend(fresh);

        let tmp = path.with_extension("tmp");
        {
            let mut f = File::create(&tmp)?;
            f.write_all(self.header.as_bytes())?;
            for row in done.values() {
                writeln!(f, "{row}")?;
            }
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(computed)
    }
}
