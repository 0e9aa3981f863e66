mod common;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use common::*;
use gridsort_core::imgscan::{decode_path, scan, sort_by_metadata, FilterSpec, Range, ScanRequest, SortKey};
use proptest::prelude::*;
use rand::Rng;
use tempfile::TempDir;

/// Twelve files across two folders, sizes spanning well below 1 KiB to well
/// above 10 KiB, plus non-image files that must be ignored.
fn fixture_tree() -> TempDir {
    let dir = TempDir::new().unwrap();
    let mut rng = rng(1);
    let sizes = [
        (4, 4),
        (12, 12),
        (20, 20),
        (30, 30),
        (40, 40),
        (50, 50),
        (60, 60),
        (70, 70),
        (90, 90),
    ];
    for (i, (w, h)) in sizes.iter().enumerate() {
        let sub = if i % 2 == 0 { "a" } else { "b/deep" };
        write_png(
            &dir.path().join(sub).join(format!("n{i:02}.png")),
            &random_image(&mut rng, *w, *h),
        );
    }
    for i in 0..3 {
        let img = random_image(&mut rng, 40 + i * 10, 40);
        let path = dir.path().join("a").join(format!("j{i}.jpg"));
        img.save(&path).unwrap();
    }
    std::fs::write(dir.path().join("a/notes.txt"), vec![b'x'; 4000]).unwrap();
    std::fs::write(dir.path().join("b/readme.md"), b"hello").unwrap();
    dir
}

/// `(size, path)` of every accepted image file, from `find`.
fn find_oracle(root: &Path) -> Vec<(u64, PathBuf)> {
    let out = Command::new("find")
        .arg(root)
        .args(["-type", "f", "-printf", "%s %p\\n"])
        .output()
        .expect("find is available");
    let accepted = ["png", "jpg", "jpeg", "bmp", "gif", "webp"];
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .filter_map(|line| {
            let (size, path) = line.split_once(' ')?;
            let ext = Path::new(path).extension()?.to_str()?.to_ascii_lowercase();
            accepted
                .contains(&ext.as_str())
                .then(|| (size.parse().unwrap(), PathBuf::from(path)))
        })
        .collect()
}

#[test]
fn size_filter_matches_find() {
    let tree = fixture_tree();
    let root = tree.path().canonicalize().unwrap();
    let all = find_oracle(&root);
    assert_eq!(all.len(), 12);

    let filter = FilterSpec {
        size_range: Some(Range::new(1024, 10 * 1024).unwrap()),
        ..Default::default()
    };
    let got: BTreeSet<PathBuf> = scan(&ScanRequest::new([&root], true).with_filter(filter))
        .records
        .into_iter()
        .map(|r| r.path)
        .collect();
    let want: BTreeSet<PathBuf> = all
        .into_iter()
        .filter(|(s, _)| (1024..=10 * 1024).contains(s))
        .map(|(_, p)| p)
        .collect();
    assert!(!want.is_empty());
    assert_eq!(got, want);
}

#[test]
fn non_recursive_sees_top_level_only() {
    let tree = fixture_tree();
    let root = tree.path().join("a").canonicalize().unwrap();
    let flat = scan(&ScanRequest::new([&root], false)).records;
    assert_eq!(flat.len(), 8);
    let nested = scan(&ScanRequest::new([tree.path().join("b")], false)).records;
    assert!(nested.is_empty());
}

#[test]
fn size_sort_matches_find() {
    let tree = fixture_tree();
    let root = tree.path().canonicalize().unwrap();
    let records = scan(&ScanRequest::new([&root], true)).records;
    let got: Vec<PathBuf> = sort_by_metadata(&records, SortKey::Size, false)
        .into_iter()
        .map(|r| r.path)
        .collect();
    let mut want = find_oracle(&root);
    want.sort();
    let want: Vec<PathBuf> = want.into_iter().map(|(_, p)| p).collect();
    assert_eq!(got, want);
}

#[test]
fn png_write_then_decode_is_lossless() {
    let dir = TempDir::new().unwrap();
    let mut rng = rng(2);
    for i in 0..100 {
        let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
        let img = random_image(&mut rng, w, h);
        let path = dir.path().join(format!("{i}.png"));
        img.save(&path).unwrap();
        assert_eq!(decode_path(&path).unwrap(), img, "image {i}");
    }
}

#[test]
fn overlapping_roots_list_each_file_once() {
    let tree = fixture_tree();
    let out = scan(&ScanRequest::new(
        [tree.path(), &tree.path().join("a"), tree.path()],
        true,
    ));
    assert_eq!(out.records.len(), 12);
    assert!(out.errors.is_empty());
}

#[test]
fn missing_root_reported_but_others_scanned() {
    let tree = fixture_tree();
    let out = scan(&ScanRequest::new(
        [tree.path().join("a"), tree.path().join("nope")],
        false,
    ));
    assert_eq!(out.records.len(), 8);
    assert_eq!(out.errors.len(), 1);
}

fn sized_tree(sizes: &[usize]) -> TempDir {
    let dir = TempDir::new().unwrap();
    for (i, s) in sizes.iter().enumerate() {
        std::fs::write(dir.path().join(format!("f{i}.png")), vec![0u8; *s]).unwrap();
    }
    dir
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tightening_a_range_never_adds_records(
        sizes in prop::collection::vec(0usize..5000, 1..12),
        lo in 0i64..2500,
        width in 0i64..5000,
        shrink_lo in 0i64..1000,
        shrink_hi in 0i64..1000,
    ) {
        let tree = sized_tree(&sizes);
        let run = |lo: i64, hi: i64| -> BTreeSet<PathBuf> {
            let filter = FilterSpec { size_range: Some(Range::new(lo, hi).unwrap()), ..Default::default() };
            scan(&ScanRequest::new([tree.path()], false).with_filter(filter)).records.into_iter().map(|r| r.path).collect()
        };
        let wide = run(lo, lo + width);
        let (nlo, nhi) = (lo + shrink_lo.min(width), (lo + width - shrink_hi).max(lo + shrink_lo.min(width)));
        let narrow = run(nlo, nhi);
        prop_assert!(narrow.is_subset(&wide));
    }

    #[test]
    fn scanning_twice_is_identical(sizes in prop::collection::vec(0usize..3000, 0..10), recursive: bool) {
        let tree = sized_tree(&sizes);
        std::fs::create_dir_all(tree.path().join("sub")).unwrap();
        std::fs::write(tree.path().join("sub/x.gif"), b"GIF89a").unwrap();
        let req = ScanRequest::new([tree.path()], recursive);
        let first = scan(&req).records;
        prop_assert_eq!(&first, &scan(&req).records);
        prop_assert_eq!(first.len(), sizes.len() + usize::from(recursive));
    }
}
