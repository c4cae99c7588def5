use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Single,
    Complete,
    #[default]
    Average,
}

/// One agglomeration step. Leaves are clusters `0..n`; the cluster formed
/// by merge `i` gets id `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub method: Linkage,
    pub merges: Vec<Merge>,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Agglomerative clustering with Euclidean distances. The closest pair of
/// active clusters merges first; equal distances go to the pair with the
/// smallest ids.
pub fn linkage(vectors: &[Vec<f64>], method: Linkage) -> Result<Dendrogram> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::input("clustering needs at least 2 vectors"));
    }
    let d = vectors[0].len();
    if vectors.iter().any(|v| v.len() != d) {
        return Err(Error::input("vectors have different lengths"));
    }
    // slot i holds the cluster currently stored there
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let v = euclidean(&vectors[i], &vectors[j]);
            dist[i * n + j] = v;
            dist[j * n + i] = v;
        }
    }
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if !active[j] {
                    continue;
                }
                let v = dist[i * n + j];
                let (lo, hi) = (id[i].min(id[j]), id[i].max(id[j]));
                let better = match best {
                    None => true,
                    Some((bv, blo, bhi, _, _)) => v < bv || (v == bv && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((v, lo, hi, i, j));
                }
            }
        }
        let (height, lo, hi, i, j) = best.expect("two active clusters remain");
        let merged = size[i] + size[j];
        merges.push(Merge { a: lo, b: hi, height, size: merged });
        // Lance-Williams update into slot i
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let (dik, djk) = (dist[i * n + k], dist[j * n + k]);
            let v = match method {
                Linkage::Single => dik.min(djk),
                Linkage::Complete => dik.max(djk),
                Linkage::Average => (size[i] as f64 * dik + size[j] as f64 * djk) / merged as f64,
            };
            dist[i * n + k] = v;
            dist[k * n + i] = v;
        }
        active[j] = false;
        size[i] = merged;
        id[i] = n + step;
    }
    Ok(Dendrogram { n, method, merges })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastStats {
    /// Mean normalized cophenetic distance over same-class pairs.
    pub same_class: f64,
    pub cross_class: f64,
    /// `same_class / cross_class`; 1 when both are zero.
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterContrastReport {
    pub raw: ContrastStats,
    pub transformed: ContrastStats,
    /// `transformed.ratio - raw.ratio`; negative means classes separate
    /// earlier after the transformation.
    pub difference: f64,
}

impl Dendrogram {
    pub fn final_height(&self) -> f64 {
        self.merges.last().map_or(0.0, |m| m.height)
    }

    /// Leaves under every cluster id, leaves first.
    fn members(&self) -> Vec<Vec<usize>> {
        let mut members: Vec<Vec<usize>> = (0..self.n).map(|i| vec![i]).collect();
        for m in &self.merges {
            let mut v = members[m.a].clone();
            v.extend_from_slice(&members[m.b]);
            members.push(v);
        }
        members
    }

    /// Full `n x n` cophenetic distance matrix, row-major.
    pub fn cophenetic(&self) -> Vec<f64> {
        let n = self.n;
        let members = self.members();
        let mut out = vec![0.0; n * n];
        for m in &self.merges {
            for &p in &members[m.a] {
                for &q in &members[m.b] {
                    out[p * n + q] = m.height;
                    out[q * n + p] = m.height;
                }
            }
        }
        out
    }

    /// Leaves in plotting order (left subtree first).
    pub fn leaf_order(&self) -> Vec<usize> {
        if self.merges.is_empty() {
            return (0..self.n).collect();
        }
        let mut out = Vec::with_capacity(self.n);
        let mut stack = vec![self.n + self.merges.len() - 1];
        while let Some(c) = stack.pop() {
            if c < self.n {
                out.push(c);
            } else {
                let m = &self.merges[c - self.n];
                stack.push(m.b);
                stack.push(m.a);
            }
        }
        out
    }

    pub fn contrast(&self, labels: &[u32]) -> Result<ContrastStats> {
        if labels.len() != self.n {
            return Err(Error::input(format!("{} labels for {} leaves", labels.len(), self.n)));
        }
        let top = self.final_height();
        let coph = self.cophenetic();
        let (mut same, mut ns, mut cross, mut nc) = (0.0, 0usize, 0.0, 0usize);
        for i in 0..self.n {
            for j in i + 1..self.n {
                let v = if top > 0.0 { coph[i * self.n + j] / top } else { 0.0 };
                if labels[i] == labels[j] {
                    same += v;
                    ns += 1;
                } else {
                    cross += v;
                    nc += 1;
                }
            }
        }
        let same = if ns == 0 { 0.0 } else { same / ns as f64 };
        let cross = if nc == 0 { 0.0 } else { cross / nc as f64 };
        let ratio = if cross > 0.0 { same / cross } else { 1.0 };
        Ok(ContrastStats { same_class: same, cross_class: cross, ratio })
    }

    /// Static SVG rendering with leaf labels and a linear height axis.
    pub fn to_svg(&self, labels: Option<&[String]>) -> String {
        let (w, h, margin, bottom) = (40.0 + 24.0 * self.n as f64, 360.0, 50.0, 60.0);
        let top = self.final_height();
        let plot_h = h - margin - bottom;
        let y_of = |height: f64| if top > 0.0 { h - bottom - plot_h * height / top } else { h - bottom };
        let order = self.leaf_order();
        let mut x = vec![0.0; self.n + self.merges.len()];
        let mut y = vec![h - bottom; self.n + self.merges.len()];
        for (pos, &leaf) in order.iter().enumerate() {
            x[leaf] = margin + 24.0 * pos as f64;
        }
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="black"/>"#,
            margin - 20.0,
            y_of(0.0),
            y_of(top)
        );
        for k in 0..=4 {
            let v = top * f64::from(k) / 4.0;
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="end">{v:.3}</text>"#,
                margin - 24.0,
                y_of(v) + 3.0
            );
        }
        for (i, m) in self.merges.iter().enumerate() {
            let c = self.n + i;
            x[c] = 0.5 * (x[m.a] + x[m.b]);
            y[c] = y_of(m.height);
            let _ = writeln!(
                svg,
                r#"<path d="M{:.1},{:.1} V{:.1} H{:.1} V{:.1}" fill="none" stroke="steelblue"/>"#,
                x[m.a], y[m.a], y[c], x[m.b], y[m.b]
            );
        }
        for &leaf in &order {
            let text = labels.and_then(|l| l.get(leaf)).cloned().unwrap_or_else(|| leaf.to_string());
            let _ = writeln!(
                svg,
                r#"<text x="{0:.1}" y="{1:.1}" font-size="9" text-anchor="end" transform="rotate(-90 {0:.1} {1:.1})">{2}</text>"#,
                x[leaf] + 3.0,
                h - bottom + 6.0,
                xml_escape(&text)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Compare how early same-class leaves join in two dendrograms over the
/// same labelled leaves.
pub fn cluster_contrast(
    raw: (&Dendrogram, &[u32]),
    transformed: (&Dendrogram, &[u32]),
) -> Result<ClusterContrastReport> {
    if raw.1 != transformed.1 || raw.0.n != transformed.0.n {
        return Err(Error::input("dendrograms must cover the same labelled leaves"));
    }
    let r = raw.0.contrast(raw.1)?;
    let t = transformed.0.contrast(transformed.1)?;
    Ok(ClusterContrastReport { raw: r, transformed: t, difference: t.ratio - r.ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example_heights() {
        let d = linkage(&[vec![0.0], vec![1.0], vec![10.0]], Linkage::Average).unwrap();
        assert_eq!(d.merges, vec![
            Merge { a: 0, b: 1, height: 1.0, size: 2 },
            Merge { a: 2, b: 3, height: 9.5, size: 3 },
        ]);
        let s = linkage(&[vec![0.0], vec![1.0], vec![10.0]], Linkage::Single).unwrap();
        assert_eq!(s.merges[1].height, 9.0);
        let c = linkage(&[vec![0.0], vec![1.0], vec![10.0]], Linkage::Complete).unwrap();
        assert_eq!(c.merges[1].height, 10.0);
    }

    #[test]
    fn identical_vectors_and_errors() {
        let d = linkage(&[vec![1.0, 2.0], vec![1.0, 2.0]], Linkage::Average).unwrap();
        assert_eq!(d.merges.len(), 1);
        assert_eq!(d.merges[0].height, 0.0);
        assert!(matches!(linkage(&[vec![1.0]], Linkage::Average), Err(Error::Input(_))));
    }

    #[test]
    fn ties_merge_smallest_ids_first() {
        let d = linkage(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], Linkage::Average).unwrap();
        assert_eq!((d.merges[0].a, d.merges[0].b), (0, 1));
        assert_eq!((d.merges[1].a, d.merges[1].b), (2, 3));
    }

    #[test]
    fn contrast_ordering() {
        let pts = vec![vec![0.0], vec![0.1], vec![5.0], vec![5.1]];
        let d = linkage(&pts, Linkage::Average).unwrap();
        let labels = [0, 0, 1, 1];
        let c = d.contrast(&labels).unwrap();
        assert!(c.ratio < 1.0);
        let same = cluster_contrast((&d, &labels), (&d, &labels)).unwrap();
        assert_eq!(same.difference, 0.0);
        assert!(cluster_contrast((&d, &labels), (&d, &[0, 1, 0, 1])).is_err());
    }

    #[test]
    fn svg_mentions_every_leaf() {
        let d = linkage(&[vec![0.0], vec![1.0], vec![10.0]], Linkage::Average).unwrap();
        let names = vec!["a<".to_string(), "b".to_string(), "c".to_string()];
        let svg = d.to_svg(Some(&names));
        assert!(svg.starts_with("<svg") && svg.contains("a&lt;") && svg.contains(">c</text>"));
        assert_eq!(svg.matches("<path").count(), 2);
    }
}
