use std::io::Read;

use crate::{Error, Result};

/// One user–item interaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub user_id: String,
    pub item_id: String,
    /// Seconds since the Unix epoch, non-negative.
    pub timestamp: i64,
}

impl Event {
    pub fn new(user_id: impl Into<String>, item_id: impl Into<String>, timestamp: i64) -> Self {
        Self {
            user_id: user_id.into(),
            item_id: item_id.into(),
            timestamp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the input (the header is line 1).
    pub line: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct ParsedEvents {
    pub events: Vec<Event>,
    pub row_errors: Vec<RowError>,
}

pub const EVENTS_HEADER: [&str; 3] = ["user_id", "item_id", "timestamp"];

/// Parses `user_id,item_id,timestamp` rows. Bad rows are collected rather
/// than aborting the parse, unless more than 10% of the data rows are bad.
/// A single bad row is never fatal.
pub fn parse_events<R: Read>(reader: R) -> Result<ParsedEvents> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| Error::Format(format!("events header: {e}")))?;
    if header.len() != 3 || header.iter().zip(EVENTS_HEADER).any(|(a, b)| a != b) {
        return Err(Error::Format(format!(
            "events file must start with header `user_id,item_id,timestamp`, found `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut out = ParsedEvents::default();
    let mut rows = 0usize;
    for record in rdr.records() {
        rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                out.row_errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        match parse_row(&record) {
            Ok(ev) => out.events.push(ev),
            Err(message) => out.row_errors.push(RowError { line, message }),
        }
    }

    if out.row_errors.len() > 1 && out.row_errors.len() * 10 > rows {
        return Err(Error::Format(format!(
            "{} of {} event rows are malformed (first at line {}: {})",
            out.row_errors.len(),
            rows,
            out.row_errors[0].line,
            out.row_errors[0].message
        )));
    }
    Ok(out)
}

fn parse_row(record: &csv::StringRecord) -> std::result::Result<Event, String> {
    if record.len() != 3 {
        return Err(format!("expected 3 fields, found {}", record.len()));
    }
    let (user, item, ts) = (&record[0], &record[1], &record[2]);
    if user.is_empty() || item.is_empty() {
        return Err("empty user_id or item_id".into());
    }
    let timestamp: i64 = ts
        .parse()
        .map_err(|_| format!("timestamp {ts:?} is not an integer"))?;
    if timestamp < 0 {
        return Err(format!("negative timestamp {timestamp}"));
    }
    Ok(Event::new(user, item, timestamp))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_fields_directly() {
        let p = parse_events("user_id,item_id,timestamp\nu1,i9,1000\n".as_bytes()).unwrap();
        assert_eq!(p.events, vec![Event::new("u1", "i9", 1000)]);
        assert!(p.row_errors.is_empty());
    }

    #[test]
    fn header_only_is_empty() {
        let p = parse_events("user_id,item_id,timestamp\n".as_bytes()).unwrap();
        assert!(p.events.is_empty());
    }

    #[test]
    fn missing_header_is_format_error() {
        assert!(matches!(
            parse_events("u1,i9,1000\n".as_bytes()),
            Err(Error::Format(_))
        ));
        assert!(matches!(parse_events("".as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn bad_timestamp_is_collected() {
        let mut text = String::from("user_id,item_id,timestamp\nu1,i9,abc\n");
        for i in 0..9 {
            text.push_str(&format!("u1,i{i},{}\n", 100 + i));
        }
        let p = parse_events(text.as_bytes()).unwrap();
        assert_eq!(p.events.len(), 9);
        assert_eq!(p.row_errors.len(), 1);
        assert_eq!(p.row_errors[0].line, 2);
    }

    #[test]
    fn one_bad_row_among_three_valid() {
        let text = "user_id,item_id,timestamp\nu1,i9,abc\nu1,i1,1\nu1,i2,2\nu2,i3,3\n";
        let p = parse_events(text.as_bytes()).unwrap();
        assert_eq!(p.events.len(), 3);
        assert_eq!(p.row_errors.len(), 1);
    }

    #[test]
    fn many_bad_rows_are_fatal() {
        let text = "user_id,item_id,timestamp\nu1,i9,abc\nu1,i1,x\nu1,i2,2\nu2,i3,3\n";
        assert!(matches!(parse_events(text.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn wrong_field_count_and_negative_time() {
        let mut text = String::from("user_id,item_id,timestamp\nu1,i9\nu1,i9,-5\n");
        for i in 0..20 {
            text.push_str(&format!("u1,i{i},{i}\n"));
        }
        let p = parse_events(text.as_bytes()).unwrap();
        assert_eq!(p.row_errors.len(), 2);
        assert_eq!(p.events.len(), 20);
    }
}
