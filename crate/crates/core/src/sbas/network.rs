use super::stack::AcquisitionSet;

/// All pairs `(i, j)`, `j > i`, whose temporal baseline is at most
/// `max_baseline_days`, in lexicographic order.
pub fn build_pairs(acquisitions: &AcquisitionSet, max_baseline_days: i64) -> Vec<(usize, usize)> {
    let n = acquisitions.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if acquisitions.days_between(i, j) <= max_baseline_days {
                pairs.push((i, j));
            } else {
                break;
            }
        }
    }
    pairs
}

/// Connected components of the epoch graph whose edges are the pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connectivity {
    pub connected: bool,
    /// Component label per epoch; labels are numbered by first appearance.
    pub labels: Vec<usize>,
    pub n_components: usize,
}

impl Connectivity {
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_components];
        for (epoch, &l) in self.labels.iter().enumerate() {
            out[l].push(epoch);
        }
        out
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub fn check_connectivity(pairs: &[(usize, usize)], n_epochs: usize) -> Connectivity {
    let mut parent: Vec<usize> = (0..n_epochs).collect();
    for &(i, j) in pairs {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut label_of_root = vec![usize::MAX; n_epochs];
    let mut labels = vec![0; n_epochs];
    let mut next = 0;
    for e in 0..n_epochs {
        let r = find(&mut parent, e);
        if label_of_root[r] == usize::MAX {
            label_of_root[r] = next;
            next += 1;
        }
        labels[e] = label_of_root[r];
    }
    Connectivity {
        connected: next <= 1,
        labels,
        n_components: next,
    }
}
