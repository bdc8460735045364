use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use cakecut::TraceSink;

/// Writes trace lines to a file, flushing when dropped.
pub struct FileTrace {
    out: BufWriter<File>,
}

impl FileTrace {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(FileTrace { out: BufWriter::new(File::create(path)?) })
    }
}

impl TraceSink for FileTrace {
    fn line(&mut self, text: &str) {
        // A failed trace write must not change the run; it is reported at
        // flush time instead.
        let _ = writeln!(self.out, "{text}");
    }
}

impl Drop for FileTrace {
    fn drop(&mut self) {
        if let Err(e) = self.out.flush() {
            eprintln!("warning: could not flush trace: {e}");
        }
    }
}

/// Collects trace lines in memory.
#[derive(Clone, Default)]
pub struct MemoryTrace(pub std::rc::Rc<std::cell::RefCell<Vec<String>>>);

impl TraceSink for MemoryTrace {
    fn line(&mut self, text: &str) {
        self.0.borrow_mut().push(text.to_string());
    }
}
