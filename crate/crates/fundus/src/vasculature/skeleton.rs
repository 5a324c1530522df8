//! Topology-preserving morphological thinning.
//!
//! Pixels are deleted sequentially in four directional passes per round
//! (north, south, east, west boundary pixels). A pixel is deletable when it
//! has 2..=6 foreground neighbors and crossing number 1, so each single
//! deletion keeps the component count and 8-connectivity intact. Endpoints
//! (one neighbor) and isolated pixels are never deleted. The process stops
//! at a fixed point, which makes it idempotent.

use crate::imaging::BitMap;

/// Neighbor ring in the order N, NE, E, SE, S, SW, W, NW.
const RING: [(i64, i64); 8] =
    [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

#[inline]
fn neighbors(map: &BitMap, x: usize, y: usize) -> [bool; 8] {
    let (w, h) = (map.width() as i64, map.height() as i64);
    let mut out = [false; 8];
    for (i, &(dx, dy)) in RING.iter().enumerate() {
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx >= 0 && ny >= 0 && nx < w && ny < h {
            out[i] = map.get(nx as usize, ny as usize);
        }
    }
    out
}

/// Number of 0->1 transitions around the ring.
#[inline]
fn crossing_number(n: &[bool; 8]) -> usize {
    let mut count = 0;
    for i in 0..8 {
        if !n[i] && n[(i + 1) % 8] {
            count += 1;
        }
    }
    count
}

#[inline]
fn deletable(n: &[bool; 8], side: usize) -> bool {
    if n[side] {
        return false; // not a boundary pixel on this side
    }
    let b = n.iter().filter(|&&v| v).count();
    (2..=6).contains(&b) && crossing_number(n) == 1
}

/// Thins a binary map to a 1-px-wide, 8-connected skeleton.
///
/// Candidates are marked against the map as it stood at the start of the
/// pass (so one pass peels one layer per side), then deleted one at a time
/// with the conditions re-checked against the live map (so each deletion is
/// individually topology-safe).
pub fn skeletonize(map: &BitMap) -> BitMap {
    let mut out = map.clone();
    let (w, h) = (out.width(), out.height());
    // boundary side checked per pass: N, S, E, W
    let sides = [0usize, 4, 2, 6];
    let mut marked = Vec::new();
    loop {
        let mut changed = false;
        for &side in &sides {
            marked.clear();
            for y in 0..h {
                for x in 0..w {
                    if out.get(x, y) && deletable(&neighbors(&out, x, y), side) {
                        marked.push((x, y));
                    }
                }
            }
            for &(x, y) in &marked {
                if deletable(&neighbors(&out, x, y), side) {
                    out.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return out;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn component_count(map: &BitMap) -> usize {
        let (w, h) = (map.width(), map.height());
        let mut seen = vec![false; w * h];
        let mut count = 0;
        for sy in 0..h {
            for sx in 0..w {
                if !map.get(sx, sy) || seen[sy * w + sx] {
                    continue;
                }
                count += 1;
                let mut stack = vec![(sx, sy)];
                seen[sy * w + sx] = true;
                while let Some((x, y)) = stack.pop() {
                    for &(dx, dy) in &RING {
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if map.get(nx, ny) && !seen[ny * w + nx] {
                            seen[ny * w + nx] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn wide_bar_thins_to_middle_row_centerline() {
        // 40x11 map with a 5-px-wide horizontal bar on rows 3..=7
        let mut map = BitMap::new(40, 11);
        for y in 3..=7 {
            for x in 0..40 {
                map.set(x, y, true);
            }
        }
        let skel = skeletonize(&map);
        let set: Vec<(usize, usize)> = (0..11)
            .flat_map(|y| (0..40).map(move |x| (x, y)))
            .filter(|&(x, y)| skel.get(x, y))
            .collect();
        assert!(!set.is_empty());
        for &(_, y) in &set {
            assert_eq!(y, 5, "skeleton pixel off the middle row: {set:?}");
        }
        assert!(set.len() >= 30, "centerline too short: {}", set.len());
    }

    #[test]
    fn empty_map_stays_empty() {
        let map = BitMap::new(16, 16);
        assert_eq!(skeletonize(&map).count_set(), 0);
    }

    #[test]
    fn idempotent_and_never_grows() {
        let mut map = BitMap::new(48, 48);
        for y in 10..20 {
            for x in 5..43 {
                map.set(x, y, true);
            }
        }
        for y in 25..45 {
            for x in 20..26 {
                map.set(x, y, true);
            }
        }
        let once = skeletonize(&map);
        let twice = skeletonize(&once);
        assert_eq!(once.data(), twice.data());
        assert!(once.count_set() <= map.count_set());
    }

    #[test]
    fn connectivity_preserved() {
        let mut map = BitMap::new(64, 64);
        // three separate blobs, including a 2x2 one
        for y in 5..15 {
            for x in 5..25 {
                map.set(x, y, true);
            }
        }
        for y in 30..50 {
            for x in 40..48 {
                map.set(x, y, true);
            }
        }
        map.set(55, 5, true);
        map.set(56, 5, true);
        map.set(55, 6, true);
        map.set(56, 6, true);
        let before = component_count(&map);
        let skel = skeletonize(&map);
        assert_eq!(component_count(&skel), before);
    }

    #[test]
    fn isolated_pixel_survives() {
        let mut map = BitMap::new(8, 8);
        map.set(4, 4, true);
        let skel = skeletonize(&map);
        assert!(skel.get(4, 4));
        assert_eq!(skel.count_set(), 1);
    }
}
