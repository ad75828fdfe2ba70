//! Line-delimited record files: one JSON object per line, UTF-8, keys in
//! struct declaration order, optional keys omitted when absent.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Dataset, HouseRecord, PhotoRecord};

/// Reads every non-blank line of `path` as one record.
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_records_with(path, |_| Ok(()))
}

/// Like [`read_records`], running `check` on each record so that invariant
/// violations are reported with their line number.
pub fn read_records_with<T, F>(path: &Path, mut check: F) -> Result<Vec<T>>
where
    T: DeserializeOwned,
    F: FnMut(&T) -> Result<()>,
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: T = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        check(&rec).map_err(|e| parse_err(e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records<'a, T, I>(path: &Path, records: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::invalid(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// File names of a dataset stored as a directory.
pub const PHOTOS_FILE: &str = "photos.jsonl";
pub const HOUSES_FILE: &str = "houses.jsonl";

pub fn load_dataset_dir(dir: &Path) -> Result<Dataset> {
    load_dataset(&dir.join(PHOTOS_FILE), &dir.join(HOUSES_FILE))
}

pub fn save_dataset_dir(dataset: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_dataset(dataset, &dir.join(PHOTOS_FILE), &dir.join(HOUSES_FILE))
}

pub fn load_dataset(photos_path: &Path, houses_path: &Path) -> Result<Dataset> {
    let photos: Vec<PhotoRecord> = read_records_with(photos_path, PhotoRecord::validate)?;
    let houses: Vec<HouseRecord> = read_records_with(houses_path, HouseRecord::validate)?;
    Dataset::new(photos, houses)
}

/// Writes photos and houses in ascending id order, so two saves of the same
/// dataset are byte-identical.
pub fn save_dataset(dataset: &Dataset, photos_path: &Path, houses_path: &Path) -> Result<()> {
    write_records(photos_path, dataset.photos())?;
    write_records(houses_path, dataset.houses())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MetadataVector, RoomCategory, Source, Split};

    fn photo(id: &str) -> PhotoRecord {
        PhotoRecord {
            id: id.into(),
            source: Source::Zillow,
            features: vec![0.25, -1.0, 3.5],
            room_true: Some(RoomCategory::Kitchen),
            budget_level: None,
            latent_luxury: None,
            house_id: Some("h1".into()),
        }
    }

    fn house(photo_ids: &[&str]) -> HouseRecord {
        HouseRecord {
            id: "h1".into(),
            metadata: MetadataVector {
                offered_price: 310_000.0,
                zestimate: 305_000.0,
                size: 1800.0,
                age: 12.0,
                bedrooms: 3.0,
                bathrooms: 2.0,
            },
            photo_ids: photo_ids.iter().map(|s| s.to_string()).collect(),
            purchase_price: Some(300_000.0),
            split: Split::Train,
        }
    }

    fn sample() -> Dataset {
        Dataset::new(
            vec![photo("p3"), photo("p1"), photo("p2")],
            vec![house(&["p1", "p2", "p3"])],
        )
        .unwrap()
    }

    #[test]
    fn minimal_dataset_loads() {
        let dir = tempfile::tempdir().unwrap();
        let (pp, hp) = (dir.path().join("photos.jsonl"), dir.path().join("houses.jsonl"));
        save_dataset(&sample(), &pp, &hp).unwrap();
        let d = load_dataset(&pp, &hp).unwrap();
        assert_eq!(d.num_photos(), 3);
        assert_eq!(d.num_houses(), 1);
        assert_eq!(d, sample());
    }

    #[test]
    fn empty_houses_file_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let (pp, hp) = (dir.path().join("p.jsonl"), dir.path().join("h.jsonl"));
        let mut p = photo("p1");
        p.house_id = None;
        write_records(&pp, [&p]).unwrap();
        std::fs::write(&hp, "").unwrap();
        let d = load_dataset(&pp, &hp).unwrap();
        assert_eq!((d.num_photos(), d.num_houses()), (1, 0));
    }

    #[test]
    fn dangling_photo_reference_is_reported() {
        let err = Dataset::new(vec![photo("p1")], vec![house(&["p1", "p99"])]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("p99") && msg.contains("h1"), "{msg}");
    }

    #[test]
    fn malformed_line_names_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let (pp, hp) = (dir.path().join("photos.jsonl"), dir.path().join("houses.jsonl"));
        save_dataset(&sample(), &pp, &hp).unwrap();
        let mut text = std::fs::read_to_string(&pp).unwrap();
        text.push_str("{\"id\": \"broken\"\n");
        std::fs::write(&pp, text).unwrap();
        let msg = load_dataset(&pp, &hp).unwrap_err().to_string();
        assert!(msg.contains("photos.jsonl:4"), "{msg}");
    }

    #[test]
    fn optional_fields_are_omitted_and_saves_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = photo("p1");
        p.room_true = None;
        p.house_id = None;
        let d = Dataset::new(vec![p], vec![]).unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        let h = dir.path().join("h");
        save_dataset(&d, &a, &h).unwrap();
        save_dataset(&d, &b, &h).unwrap();
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text, "{\"id\":\"p1\",\"source\":\"zillow\",\"features\":[0.25,-1.0,3.5]}\n");
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn records_written_in_id_order() {
        let dir = tempfile::tempdir().unwrap();
        let (pp, hp) = (dir.path().join("p"), dir.path().join("h"));
        save_dataset(&sample(), &pp, &hp).unwrap();
        let ids: Vec<String> = read_records::<PhotoRecord>(&pp)
            .unwrap()
            .into_iter()
            .map(|p| p.id)
            .collect();
        assert_eq!(ids, ["p1", "p2", "p3"]);
    }

    #[test]
    fn unwritable_path_reports_path() {
        let msg = save_dataset(&sample(), Path::new("/nonexistent/dir/p"), Path::new("/nonexistent/dir/h"))
            .unwrap_err()
            .to_string();
        assert!(msg.contains("/nonexistent/dir/p"), "{msg}");
    }
}
