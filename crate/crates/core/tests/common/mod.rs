#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use petit::{Program, TestSuite};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Every file under `dir`, keyed by relative path.
pub fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

pub fn copy_fixture(name: &str, to: &Path) {
    for (rel, bytes) in tree(&fixture(name)) {
        let dest = to.join(rel);
        fs::create_dir_all(dest.parent().unwrap()).unwrap();
        fs::write(dest, bytes).unwrap();
    }
}

/// The calc fixture with `Arith.max` returning its first argument on both
/// paths. `return b;` elsewhere in the type is the fix.
pub fn broken_calc(to: &Path) {
    copy_fixture("calc", to);
    let path = to.join("src/num/Arith.pt");
    let text = fs::read_to_string(&path).unwrap();
    let broken = text.replacen("return b;\n    }\n\n    fn min", "return a;\n    }\n\n    fn min", 1);
    assert_ne!(text, broken);
    fs::write(path, broken).unwrap();
}

pub fn project(src: &str, tests: &str) -> (Program, TestSuite) {
    let p = petit::parse_program(&BTreeMap::from([("m.pt".to_string(), src.to_string())])).unwrap();
    let s = petit::parse_tests(&BTreeMap::from([("m.test.pt".to_string(), tests.to_string())])).unwrap();
    (p, s)
}
