//! Flight CSV ingestion and emission.
//!
//! Schema (UTF-8, header row): `engine_id,flight_index,step,ch_1,...,ch_H`
//! with `step` a 1-based contiguous integer per flight. The emitter writes
//! the same schema, so emitted files re-ingest to an equal dataset.

use super::{DataError, FlightSeries};
use std::collections::BTreeMap;
use std::path::Path;

fn ingest_error(file: &Path, row: u64, reason: impl Into<String>) -> DataError {
    DataError::Ingest {
        file: file.display().to_string(),
        row,
        reason: reason.into(),
    }
}

/// Reads one or more schema-conforming CSV files into flights, ordered by
/// `(engine_id, flight_index)`. RUL labels derive from each engine's highest
/// flight index. Structural problems (missing columns, non-monotonic or
/// non-contiguous steps, ragged rows, unparsable numbers) fail with the file
/// and row named.
pub fn ingest<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<FlightSeries>, DataError> {
    if paths.is_empty() {
        return Err(DataError::EmptyInput);
    }
    let mut channels: Option<usize> = None;
    // (engine, flight) -> (values, last step seen)
    let mut groups: BTreeMap<(String, u32), (Vec<f32>, u32)> = BTreeMap::new();

    for path in paths {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_path(path)
            .map_err(|e| ingest_error(path, 1, format!("cannot open: {e}")))?;

        let headers = reader
            .headers()
            .map_err(|e| ingest_error(path, 1, format!("bad header: {e}")))?
            .clone();
        if headers.len() < 4 {
            return Err(ingest_error(
                path,
                1,
                format!("expected at least 4 columns, found {}", headers.len()),
            ));
        }
        for (i, expected) in ["engine_id", "flight_index", "step"].iter().enumerate() {
            if &headers[i] != *expected {
                return Err(ingest_error(
                    path,
                    1,
                    format!("column {} must be `{expected}`, found `{}`", i + 1, &headers[i]),
                ));
            }
        }
        let file_channels = headers.len() - 3;
        for c in 0..file_channels {
            let expected = format!("ch_{}", c + 1);
            if &headers[3 + c] != expected.as_str() {
                return Err(ingest_error(
                    path,
                    1,
                    format!("column {} must be `{expected}`, found `{}`", c + 4, &headers[3 + c]),
                ));
            }
        }
        match channels {
            None => channels = Some(file_channels),
            Some(h) if h != file_channels => {
                return Err(ingest_error(
                    path,
                    1,
                    format!("file has {file_channels} channels, earlier files had {h}"),
                ));
            }
            Some(_) => {}
        }

        for record in reader.records() {
            let record = record.map_err(|e| {
                let row = e.position().map(|p| p.line()).unwrap_or(0);
                ingest_error(path, row, format!("malformed record: {e}"))
            })?;
            let row = record.position().map(|p| p.line()).unwrap_or(0);

            let engine_id = record[0].to_string();
            if engine_id.is_empty() {
                return Err(ingest_error(path, row, "empty engine_id"));
            }
            let flight_index: u32 = record[1]
                .parse()
                .map_err(|_| ingest_error(path, row, format!("bad flight_index `{}`", &record[1])))?;
            if flight_index == 0 {
                return Err(ingest_error(path, row, "flight_index starts at 1"));
            }
            let step: u32 = record[2]
                .parse()
                .map_err(|_| ingest_error(path, row, format!("bad step `{}`", &record[2])))?;

            let entry = groups
                .entry((engine_id, flight_index))
                .or_insert_with(|| (Vec::new(), 0));
            if step != entry.1 + 1 {
                return Err(ingest_error(
                    path,
                    row,
                    format!(
                        "non-monotonic time: step {step} after step {} (steps must run 1, 2, ...)",
                        entry.1
                    ),
                ));
            }
            entry.1 = step;
            for field in record.iter().skip(3) {
                let value: f32 = field
                    .parse()
                    .map_err(|_| ingest_error(path, row, format!("bad measurement `{field}`")))?;
                entry.0.push(value);
            }
        }
    }

    let channels = channels.expect("at least one file was read");
    let mut max_flight: BTreeMap<String, u32> = BTreeMap::new();
    for (engine, flight) in groups.keys() {
        let peak = max_flight.entry(engine.clone()).or_insert(0);
        *peak = (*peak).max(*flight);
    }

    groups
        .into_iter()
        .map(|((engine, flight_index), (values, _))| {
            let rul = max_flight[&engine] - flight_index;
            FlightSeries::new(engine, flight_index, rul, channels, values)
        })
        .collect()
}

/// Writes flights to one CSV file in the ingestion schema. All flights must
/// share a channel count. Values print in shortest round-trip form, so an
/// emitted file re-ingests bit-exactly.
pub fn emit_flights<P: AsRef<Path>>(path: P, flights: &[FlightSeries]) -> Result<(), DataError> {
    let path = path.as_ref();
    let first = flights.first().ok_or(DataError::EmptyInput)?;
    let channels = first.channels();
    for flight in flights {
        if flight.channels() != channels {
            return Err(DataError::ChannelMismatch {
                expected: channels,
                found: flight.channels(),
            });
        }
    }

    let io_err = |source: csv::Error| match source.into_kind() {
        csv::ErrorKind::Io(source) => DataError::Io {
            file: path.display().to_string(),
            source,
        },
        other => DataError::Io {
            file: path.display().to_string(),
            source: std::io::Error::other(format!("{other:?}")),
        },
    };

    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    let mut header = vec!["engine_id".to_string(), "flight_index".into(), "step".into()];
    header.extend((1..=channels).map(|c| format!("ch_{c}")));
    writer.write_record(&header).map_err(io_err)?;

    for flight in flights {
        for step in 0..flight.steps() {
            let mut record = vec![
                flight.engine_id().to_string(),
                flight.flight_index().to_string(),
                (step + 1).to_string(),
            ];
            record.extend(flight.step_row(step).iter().map(|v| v.to_string()));
            writer.write_record(&record).map_err(io_err)?;
        }
    }
    writer.flush().map_err(|source| DataError::Io {
        file: path.display().to_string(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn toy_file_parses_into_two_flights() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "toy.csv",
            "engine_id,flight_index,step,ch_1,ch_2\n\
             e1,1,1,0.5,1.0\ne1,1,2,0.6,1.1\ne1,1,3,0.7,1.2\n\
             e1,2,1,0.8,1.3\ne1,2,2,0.9,1.4\ne1,2,3,1.0,1.5\n",
        );
        let flights = ingest(&[path]).unwrap();
        assert_eq!(flights.len(), 2);
        assert_eq!(flights[0].steps(), 3);
        assert_eq!(flights[0].rul_label(), 1);
        assert_eq!(flights[1].rul_label(), 0);
        assert_eq!(flights[0].value(1, 1), 1.1);
    }

    #[test]
    fn flight_order_in_file_does_not_matter() {
        let dir = tempfile::tempdir().unwrap();
        let sorted = write_file(
            &dir,
            "sorted.csv",
            "engine_id,flight_index,step,ch_1\n\
             e1,1,1,0.1\ne1,1,2,0.2\ne1,2,1,0.3\ne1,2,2,0.4\n",
        );
        let shuffled = write_file(
            &dir,
            "shuffled.csv",
            "engine_id,flight_index,step,ch_1\n\
             e1,2,1,0.3\ne1,1,1,0.1\ne1,2,2,0.4\ne1,1,2,0.2\n",
        );
        assert_eq!(ingest(&[sorted]).unwrap(), ingest(&[shuffled]).unwrap());
    }

    #[test]
    fn emitted_files_reingest_equal() {
        let profile = crate::data::SynthProfile {
            steps_per_flight: 30,
            flights_min: 3,
            flights_max: 5,
            ..Default::default()
        };
        let engines = crate::data::generate(2, 21, &profile).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut paths = Vec::new();
        for (i, engine) in engines.iter().enumerate() {
            let path = dir.path().join(format!("engine_{i}.csv"));
            emit_flights(&path, engine).unwrap();
            paths.push(path);
        }
        let round_tripped = ingest(&paths).unwrap();
        let mut original: Vec<FlightSeries> = engines.into_iter().flatten().collect();
        original.sort_by(|a, b| {
            (a.engine_id().to_string(), a.flight_index())
                .cmp(&(b.engine_id().to_string(), b.flight_index()))
        });
        assert_eq!(round_tripped, original);
    }

    #[test]
    fn bad_header_and_rows_are_rejected_with_location() {
        let dir = tempfile::tempdir().unwrap();

        let missing = write_file(&dir, "m.csv", "engine_id,flight_index\ne1,1\n");
        assert!(matches!(ingest(&[missing]), Err(DataError::Ingest { row: 1, .. })));

        let renamed = write_file(
            &dir,
            "r.csv",
            "engine,flight_index,step,ch_1\ne1,1,1,0.5\n",
        );
        assert!(ingest(&[renamed]).is_err());

        let nonmono = write_file(
            &dir,
            "nm.csv",
            "engine_id,flight_index,step,ch_1\ne1,1,1,0.5\ne1,1,3,0.6\n",
        );
        match ingest(&[nonmono]) {
            Err(DataError::Ingest { row, reason, .. }) => {
                assert_eq!(row, 3);
                assert!(reason.contains("non-monotonic"));
            }
            other => panic!("expected ingest error, got {other:?}"),
        }

        let ragged = write_file(
            &dir,
            "rc.csv",
            "engine_id,flight_index,step,ch_1,ch_2\ne1,1,1,0.5,0.6\ne1,1,2,0.7\n",
        );
        assert!(ingest(&[ragged]).is_err());

        let bad_float = write_file(
            &dir,
            "bf.csv",
            "engine_id,flight_index,step,ch_1\ne1,1,1,abc\n",
        );
        assert!(matches!(ingest(&[bad_float]), Err(DataError::Ingest { row: 2, .. })));
    }
}
