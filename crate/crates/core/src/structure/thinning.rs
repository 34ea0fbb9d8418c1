//! Two-subiteration thinning followed by a staircase cleanup that leaves
//! 8-connected curves one pixel wide.

use super::LineMap;

// Clockwise from north: P2..P9.
const RING: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

fn ring(lines: &LineMap, x: usize, y: usize) -> [bool; 8] {
    let mut n = [false; 8];
    for (i, (dx, dy)) in RING.iter().enumerate() {
        n[i] = lines.get_signed(x as isize + dx, y as isize + dy);
    }
    n
}

/// Thins `lines` in place to a fixed point.
pub fn skeletonize(lines: &mut LineMap) {
    let (w, h) = (lines.width(), lines.height());
    let mut marked = Vec::new();
    loop {
        let mut changed = false;
        for pass in 0..2 {
            marked.clear();
            for y in 0..h {
                for x in 0..w {
                    if lines.get(x, y) && removable(&ring(lines, x, y), pass) {
                        marked.push((x, y));
                    }
                }
            }
            for &(x, y) in &marked {
                lines.set(x, y, false);
            }
            changed |= !marked.is_empty();
        }
        if !changed {
            break;
        }
    }
    remove_staircase_pixels(lines);
}

fn removable(n: &[bool; 8], pass: usize) -> bool {
    let b = n.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = *n;
    if pass == 0 {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

/// Deletes pixels whose neighbours stay 8-connected without them, in raster
/// order. Endpoints are kept.
fn remove_staircase_pixels(lines: &mut LineMap) {
    let (w, h) = (lines.width(), lines.height());
    for y in 0..h {
        for x in 0..w {
            if !lines.get(x, y) {
                continue;
            }
            let n = ring(lines, x, y);
            let count = n.iter().filter(|&&v| v).count();
            if count >= 2 && neighbours_connected(&n) && !is_hole_filler(&n) {
                lines.set(x, y, false);
            }
        }
    }
}

/// Whether the set neighbours form one 8-connected group inside the 3x3
/// window (excluding the centre).
fn neighbours_connected(n: &[bool; 8]) -> bool {
    let set: Vec<usize> = (0..8).filter(|&i| n[i]).collect();
    let mut parent: Vec<usize> = (0..8).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for (ai, &a) in set.iter().enumerate() {
        for &b in &set[ai + 1..] {
            let (ax, ay) = RING[a];
            let (bx, by) = RING[b];
            if (ax - bx).abs() <= 1 && (ay - by).abs() <= 1 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    let root = find(&mut parent, set[0]);
    set.iter().all(|&i| find(&mut parent, i) == root)
}

/// A centre surrounded on all four axial sides would open a hole; keep it.
fn is_hole_filler(n: &[bool; 8]) -> bool {
    n[0] && n[2] && n[4] && n[6]
}
