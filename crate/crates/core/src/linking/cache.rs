use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::corpus::Document;
use crate::tsv::{escape, sha256_hex, unescape};

use super::{EntityAnnotation, LinkError};

/// On-disk cache of service responses, one file per document. A file is
/// keyed by doc id, text hash, endpoint and request parameters; any change
/// to those produces a different file name, so stale entries are never
/// read.
///
/// File format: a `# key=<hex>` line, then one tab-separated line per
/// annotation: `entity_id, offset, confidence, surface_form`.
#[derive(Debug)]
pub struct AnnotationCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl AnnotationCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            write_lock: Mutex::new(()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn key(document: &Document, signature: &str) -> String {
        let text_hash = sha256_hex(document.raw_text.as_bytes());
        sha256_hex(format!("{}\0{}\0{}", document.doc_id, text_hash, signature).as_bytes())
    }

    fn path_for(&self, document: &Document, key: &str) -> PathBuf {
        let safe: String = document
            .doc_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .take(64)
            .collect();
        self.dir.join(format!("{safe}-{}.tsv", &key[..16]))
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> LinkError + '_ {
        move |source| LinkError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn get(&self, document: &Document, signature: &str) -> Result<Option<Vec<EntityAnnotation>>, LinkError> {
        let key = Self::key(document, signature);
        let path = self.path_for(document, &key);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Self::io(&path)(e)),
        };
        let mut lines = text.lines();
        if lines.next() != Some(&format!("# key={key}")) {
            // collision on the truncated name; treat as a miss
            return Ok(None);
        }
        let format_err = |line: usize, message: &str| LinkError::Format {
            path: path.display().to_string(),
            line,
            message: message.to_owned(),
        };
        let mut out = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.splitn(4, '\t').collect();
            let [entity, offset, confidence, surface] = fields[..] else {
                return Err(format_err(i + 2, "expected 4 tab-separated fields"));
            };
            out.push(EntityAnnotation {
                entity_id: unescape(entity).ok_or_else(|| format_err(i + 2, "bad escape"))?,
                offset: offset.parse().map_err(|_| format_err(i + 2, "bad offset"))?,
                confidence: confidence
                    .parse()
                    .map_err(|_| format_err(i + 2, "bad confidence"))?,
                surface_form: unescape(surface).ok_or_else(|| format_err(i + 2, "bad escape"))?,
            });
        }
        Ok(Some(out))
    }

    pub fn put(&self, document: &Document, signature: &str, annotations: &[EntityAnnotation]) -> Result<(), LinkError> {
        let key = Self::key(document, signature);
        let path = self.path_for(document, &key);
        let mut body = format!("# key={key}\n");
        for a in annotations {
            body.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                escape(&a.entity_id),
                a.offset,
                a.confidence,
                escape(&a.surface_form)
            ));
        }
        let _guard = self.write_lock.lock().expect("poisoned cache lock");
        std::fs::create_dir_all(&self.dir).map_err(Self::io(&self.dir))?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, body).map_err(Self::io(&tmp))?;
        std::fs::rename(&tmp, &path).map_err(Self::io(&path))?;
        Ok(())
    }
}
