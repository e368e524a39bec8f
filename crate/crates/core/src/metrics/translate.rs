use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use image::RgbImage;

use crate::dataset::read_class_map;
use crate::error::{Error, Result};
use crate::render::ClassMap;

/// RGB to class map.
pub trait Translator {
    fn translate(&self, images: &[&RgbImage]) -> Result<Vec<ClassMap>>;
}

/// Runs an external program: one input PNG path per line on stdin, one
/// class-map PNG path (8-bit grayscale, value = class index) per line on
/// stdout, in the same order.
#[derive(Debug, Clone)]
pub struct SubprocessTranslator {
    pub program: PathBuf,
    pub args: Vec<String>,
    /// Input PNGs are written here.
    pub work_dir: PathBuf,
}

impl SubprocessTranslator {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>, work_dir: impl Into<PathBuf>) -> Self {
        SubprocessTranslator { program: program.into(), args, work_dir: work_dir.into() }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

impl Translator for SubprocessTranslator {
    fn translate(&self, images: &[&RgbImage]) -> Result<Vec<ClassMap>> {
        std::fs::create_dir_all(&self.work_dir).map_err(io_err(&self.work_dir))?;
        let mut inputs = Vec::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            let p = self.work_dir.join(format!("{i:06}_in.png"));
            img.save(&p)?;
            inputs.push(p);
        }
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Translator(format!("spawn {}: {e}", self.program.display())))?;
        {
            let mut stdin = child.stdin.take().expect("piped");
            let mut list = String::new();
            for p in &inputs {
                list.push_str(&p.to_string_lossy());
                list.push('\n');
            }
            // A translator may exit before reading everything; its status
            // is reported below.
            let _ = stdin.write_all(list.as_bytes());
        }
        let out = child.wait_with_output().map_err(|e| Error::Translator(e.to_string()))?;
        if !out.status.success() {
            return Err(Error::Translator(format!(
                "{} exited with {}: {}",
                self.program.display(),
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let stdout = String::from_utf8_lossy(&out.stdout);
        let paths: Vec<&str> = stdout.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        if paths.len() != images.len() {
            return Err(Error::Translator(format!("expected {} output paths, got {}", images.len(), paths.len())));
        }
        let mut maps = Vec::with_capacity(paths.len());
        for (p, img) in paths.iter().zip(images) {
            let cm = read_class_map(Path::new(p))?;
            if (cm.width, cm.height) != (img.width() as usize, img.height() as usize) {
                return Err(Error::Translator(format!(
                    "{p}: size {}x{} differs from input {}x{}",
                    cm.width,
                    cm.height,
                    img.width(),
                    img.height()
                )));
            }
            maps.push(cm);
        }
        Ok(maps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ClassId;

    fn sh(script: &str, dir: &Path) -> SubprocessTranslator {
        SubprocessTranslator::new("sh", vec!["-c".into(), script.into()], dir.join("work"))
    }

    #[test]
    fn round_trip_through_shell_stub() {
        let dir = tempfile::tempdir().unwrap();
        let seg = dir.path().join("seg.png");
        ClassMap::filled(4, 3, ClassId::Rocks).to_gray_image().save(&seg).unwrap();
        let t = sh(&format!("while read p; do test -f \"$p\" && echo {}; done", seg.display()), dir.path());
        let img = RgbImage::new(4, 3);
        let maps = t.translate(&[&img, &img]).unwrap();
        assert_eq!(maps.len(), 2);
        assert_eq!(maps[1], ClassMap::filled(4, 3, ClassId::Rocks));
    }

    #[test]
    fn failures_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let img = RgbImage::new(4, 3);
        assert!(matches!(sh("exit 3", dir.path()).translate(&[&img]), Err(Error::Translator(_))));
        assert!(matches!(sh("cat >/dev/null", dir.path()).translate(&[&img]), Err(Error::Translator(_))));
        let bad = dir.path().join("bad.png");
        image::GrayImage::from_pixel(4, 3, image::Luma([6])).save(&bad).unwrap();
        let t = sh(&format!("cat >/dev/null; echo {}", bad.display()), dir.path());
        assert!(matches!(t.translate(&[&img]), Err(Error::UnknownClass(6))));
        let rgb = dir.path().join("rgb.png");
        img.save(&rgb).unwrap();
        let t = sh(&format!("cat >/dev/null; echo {}", rgb.display()), dir.path());
        assert!(matches!(t.translate(&[&img]), Err(Error::Format(_))));
        let t = SubprocessTranslator::new("/nonexistent/translator", vec![], dir.path());
        assert!(matches!(t.translate(&[&img]), Err(Error::Translator(_))));
    }
}
