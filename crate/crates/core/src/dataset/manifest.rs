//! Manifest CSV: `path,adulteration_pct,sample_id,split,augmented`.
//!
//! Leading `# ` lines before the header carry provenance. UTF-8, LF line
//! endings, no quoting.

use std::path::Path;

use super::{AdulterationLevel, DatasetError, Manifest, Result, SampleRecord, Split};

pub const MANIFEST_HEADER: &str = "path,adulteration_pct,sample_id,split,augmented";

const COLUMNS: [&str; 5] = ["path", "adulteration_pct", "sample_id", "split", "augmented"];

pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let mut provenance = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
    let (header_row, header) = loop {
        match lines.next() {
            Some((_, l)) if l.starts_with('#') => {
                let body = l.trim_start_matches('#');
                provenance.push(body.strip_prefix(' ').unwrap_or(body).to_string());
            }
            Some((_, l)) if l.trim().is_empty() => continue,
            Some(h) => break h,
            None => return Err(DatasetError::NoHeader),
        }
    };

    // Column order in the file is free; all five must be present exactly once.
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if let Some(extra) = names.iter().find(|n| !COLUMNS.contains(n)) {
        return Err(DatasetError::UnexpectedColumn {
            row: header_row,
            column: extra.to_string(),
        });
    }
    let mut index = [0usize; 5];
    for (slot, col) in index.iter_mut().zip(COLUMNS) {
        *slot = names
            .iter()
            .position(|n| *n == col)
            .ok_or(DatasetError::MissingColumn { row: header_row, column: col })?;
    }

    let mut records = Vec::new();
    let mut rows = Vec::new();
    for (row, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() > names.len() {
            return Err(DatasetError::UnexpectedColumn {
                row,
                column: fields[names.len()..].join(","),
            });
        }
        let get = |k: usize| -> Result<&str> {
            fields.get(index[k]).copied().ok_or(DatasetError::MissingColumn { row, column: COLUMNS[k] })
        };
        let path = get(0)?;
        if path.is_empty() {
            return Err(DatasetError::BadField { row, column: "path", value: String::new() });
        }
        let pct = get(1)?;
        let level = pct
            .parse::<u8>()
            .ok()
            .and_then(AdulterationLevel::from_percent)
            .ok_or_else(|| DatasetError::UnknownLevel { row, value: pct.to_string() })?;
        let sample_id = get(2)?;
        if sample_id.is_empty() {
            return Err(DatasetError::BadField { row, column: "sample_id", value: String::new() });
        }
        let split_raw = get(3)?;
        let split = Split::parse(split_raw).ok_or_else(|| DatasetError::BadField {
            row,
            column: "split",
            value: split_raw.to_string(),
        })?;
        let augmented = match get(4)? {
            "true" => true,
            "false" => false,
            other => {
                return Err(DatasetError::BadField {
                    row,
                    column: "augmented",
                    value: other.to_string(),
                })
            }
        };
        records.push(SampleRecord {
            path: path.to_string(),
            level,
            sample_id: sample_id.to_string(),
            split,
            augmented,
        });
        rows.push(row);
    }
    let manifest = Manifest { records, provenance };
    // Report file line numbers rather than record ordinals.
    manifest.validate().map_err(|e| match e {
        DatasetError::DuplicatePath { row, first, path } => DatasetError::DuplicatePath {
            row: rows[row - 1],
            first: rows[first - 1],
            path,
        },
        DatasetError::UnsafePath { row, path } => DatasetError::UnsafePath { row: rows[row - 1], path },
        other => other,
    })?;
    Ok(manifest)
}

/// Canonical text form; `parse_manifest(&to_csv(m)) == m`.
pub fn to_csv(manifest: &Manifest) -> String {
    let mut out = String::new();
    for line in &manifest.provenance {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(MANIFEST_HEADER);
    out.push('\n');
    for r in &manifest.records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.path,
            r.level.percent(),
            r.sample_id,
            r.split.as_str(),
            r.augmented
        ));
    }
    out
}

fn io_err(path: &Path, e: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_manifest(&text)
}

pub fn save_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    manifest.validate()?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    std::fs::write(path, to_csv(manifest)).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Label;

    #[test]
    fn parses_a_negative_record() {
        let m = parse_manifest("path,adulteration_pct,sample_id,split,augmented\nimg/p01_f00.ppm,0,p01,train,false\n")
            .unwrap();
        assert_eq!(m.records.len(), 1);
        let r = &m.records[0];
        assert_eq!(r.label(), Label::Unadulterated);
        assert_eq!((r.split, r.augmented), (Split::Train, false));
    }

    #[test]
    fn rejects_unknown_level_with_row() {
        let err = parse_manifest("# provenance\npath,adulteration_pct,sample_id,split,augmented\na.ppm,30,p1,train,false\n")
            .unwrap_err();
        assert_eq!(err, DatasetError::UnknownLevel { row: 3, value: "30".into() });
    }

    #[test]
    fn rejects_duplicates_and_missing_columns() {
        let dup = "path,adulteration_pct,sample_id,split,augmented\na.ppm,0,p1,train,false\n\na.ppm,10,p2,val,false\n";
        assert_eq!(
            parse_manifest(dup).unwrap_err(),
            DatasetError::DuplicatePath { row: 4, first: 2, path: "a.ppm".into() }
        );
        assert_eq!(
            parse_manifest("path,adulteration_pct,sample_id,split\n").unwrap_err(),
            DatasetError::MissingColumn { row: 1, column: "augmented" }
        );
        assert_eq!(
            parse_manifest("path,adulteration_pct,sample_id,split,augmented\na.ppm,0,p1\n").unwrap_err(),
            DatasetError::MissingColumn { row: 2, column: "split" }
        );
        assert!(matches!(
            parse_manifest("path,adulteration_pct,sample_id,split,augmented\na.ppm,0,p1,test,false\n"),
            Err(DatasetError::BadField { row: 2, column: "split", .. })
        ));
        assert!(matches!(
            parse_manifest("path,adulteration_pct,sample_id,split,augmented\n../a.ppm,0,p1,val,false\n"),
            Err(DatasetError::UnsafePath { row: 2, .. })
        ));
        assert_eq!(parse_manifest("# only a comment\n").unwrap_err(), DatasetError::NoHeader);
    }

    #[test]
    fn column_order_is_free_and_output_is_canonical() {
        let m = parse_manifest("augmented,split,sample_id,adulteration_pct,path\ntrue,val,s9,50,x.ppm\n").unwrap();
        assert_eq!(to_csv(&m), format!("{MANIFEST_HEADER}\nx.ppm,50,s9,val,true\n"));
    }
}
