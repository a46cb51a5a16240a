//! Pre-trained word vectors loaded from the common text format (one token
//! per line followed by its components, with an optional `count dim` header
//! line), pooled into sentence vectors by averaging.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::tfidf::tokenize;
use super::BaselineError;

#[derive(Debug, Clone)]
pub struct WordVectorTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordVectorTable {
    pub fn load(path: &Path) -> Result<WordVectorTable, BaselineError> {
        let file = std::fs::File::open(path).map_err(|e| {
            BaselineError::VectorTable(format!("cannot open {}: {e}", path.display()))
        })?;
        WordVectorTable::parse(std::io::BufReader::new(file))
            .map_err(|e| match e {
                BaselineError::VectorTable(msg) => {
                    BaselineError::VectorTable(format!("{}: {msg}", path.display()))
                }
                other => other,
            })
    }

    pub fn parse(reader: impl BufRead) -> Result<WordVectorTable, BaselineError> {
        let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
        let mut dim: Option<usize> = None;
        for (line_no, line) in reader.lines().enumerate() {
            let line =
                line.map_err(|e| BaselineError::VectorTable(format!("read error: {e}")))?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            // fastText-style "count dim" header.
            if line_no == 0
                && fields.len() == 2
                && fields.iter().all(|f| f.parse::<usize>().is_ok())
            {
                continue;
            }
            if fields.len() < 2 {
                return Err(BaselineError::VectorTable(format!(
                    "line {}: expected a token and at least one component",
                    line_no + 1
                )));
            }
            let token = fields[0].to_string();
            let mut components = Vec::with_capacity(fields.len() - 1);
            for f in &fields[1..] {
                let value: f64 = f.parse().map_err(|_| {
                    BaselineError::VectorTable(format!(
                        "line {}: `{f}` is not a number",
                        line_no + 1
                    ))
                })?;
                components.push(value);
            }
            match dim {
                None => dim = Some(components.len()),
                Some(d) if d != components.len() => {
                    return Err(BaselineError::VectorTable(format!(
                        "line {}: dimension {} disagrees with earlier {}",
                        line_no + 1,
                        components.len(),
                        d
                    )));
                }
                _ => {}
            }
            vectors.entry(token).or_insert(components);
        }
        let dim = dim.ok_or_else(|| {
            BaselineError::VectorTable("table contains no vectors".into())
        })?;
        Ok(WordVectorTable { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Mean of the vectors of the text's known tokens; all-zeros when no
    /// token is covered by the table.
    pub fn pool(&self, text: &str) -> Vec<f64> {
        let mut sum = vec![0.0; self.dim];
        let mut hits = 0usize;
        for token in tokenize(text) {
            if let Some(v) = self.vectors.get(&token) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                hits += 1;
            }
        }
        if hits > 0 {
            for s in &mut sum {
                *s /= hits as f64;
            }
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn parses_with_and_without_header() {
        let with_header = "2 3\ndog 1.0 2.0 3.0\ncat 0.5 -0.5 1.5\n";
        let t = WordVectorTable::parse(Cursor::new(with_header)).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);

        let without = "dog 1.0 2.0 3.0\ncat 0.5 -0.5 1.5\n";
        let t = WordVectorTable::parse(Cursor::new(without)).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn dimension_mismatch_names_the_line() {
        let bad = "dog 1.0 2.0\ncat 1.0 2.0 3.0\n";
        let err = WordVectorTable::parse(Cursor::new(bad)).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn garbage_components_are_rejected() {
        let bad = "dog 1.0 banana\n";
        assert!(WordVectorTable::parse(Cursor::new(bad)).is_err());
        assert!(WordVectorTable::parse(Cursor::new("")).is_err());
    }

    #[test]
    fn pooling_averages_known_tokens() {
        let table = WordVectorTable::parse(Cursor::new("dog 2.0 4.0\ncat 0.0 2.0\n")).unwrap();
        // "Dog cat!" tokenizes to both entries.
        assert_eq!(table.pool("Dog cat!"), vec![1.0, 3.0]);
        // Unknown tokens are skipped from the mean.
        assert_eq!(table.pool("dog zebra"), vec![2.0, 4.0]);
        // Nothing known: zero vector.
        assert_eq!(table.pool("zebra lion"), vec![0.0, 0.0]);
    }
}
