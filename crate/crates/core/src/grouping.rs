//! One-hot user-to-group assignment.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Assignment of N users to G groups (time slots).
///
/// Stored as the group index of every user; the binary matrix `x` is derived
/// on demand. Members of a group are kept in ascending user order; the
/// within-group rank κ by channel gain is available through [`Grouping::kappa`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Grouping {
    num_groups: usize,
    group_of: Vec<usize>,
}

impl Grouping {
    pub fn new(group_of: Vec<usize>, num_groups: usize) -> Result<Self> {
        if num_groups == 0 {
            return Err(Error::InvalidInput("grouping needs at least one group".into()));
        }
        if group_of.is_empty() {
            return Err(Error::InvalidInput("grouping needs at least one user".into()));
        }
        if let Some((n, &g)) = group_of.iter().enumerate().find(|(_, &g)| g >= num_groups) {
            return Err(Error::InvalidInput(format!(
                "user {n} assigned to group {g} but only {num_groups} groups exist"
            )));
        }
        Ok(Self { num_groups, group_of })
    }

    /// Build from a G×N 0/1 matrix; every column must hold exactly one 1.
    pub fn from_matrix(x: &DMatrix<u8>) -> Result<Self> {
        let mut group_of = Vec::with_capacity(x.ncols());
        for (n, col) in x.column_iter().enumerate() {
            let ones: Vec<usize> = col.iter().enumerate().filter(|(_, &v)| v == 1).map(|(g, _)| g).collect();
            if ones.len() != 1 || col.iter().any(|&v| v > 1) {
                return Err(Error::InvalidInput(format!("column {n} of x is not one-hot")));
            }
            group_of.push(ones[0]);
        }
        Self::new(group_of, x.nrows())
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn num_users(&self) -> usize {
        self.group_of.len()
    }

    pub fn group_of(&self, n: usize) -> usize {
        self.group_of[n]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.group_of
    }

    pub fn x(&self) -> DMatrix<u8> {
        let mut x = DMatrix::zeros(self.num_groups, self.group_of.len());
        for (n, &g) in self.group_of.iter().enumerate() {
            x[(g, n)] = 1;
        }
        x
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.num_groups];
        for &g in &self.group_of {
            s[g] += 1;
        }
        s
    }

    pub fn size(&self, g: usize) -> usize {
        self.group_of.iter().filter(|&&h| h == g).count()
    }

    pub fn members(&self, g: usize) -> Vec<usize> {
        (0..self.group_of.len()).filter(|&n| self.group_of[n] == g).collect()
    }

    pub fn all_members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_groups];
        for (n, &g) in self.group_of.iter().enumerate() {
            out[g].push(n);
        }
        out
    }

    /// Within-group rank of every user, strongest channel gain first
    /// (ties broken by user index).
    pub fn kappa(&self, gains: &[f64]) -> Vec<usize> {
        let mut kappa = vec![0; self.group_of.len()];
        for mut members in self.all_members() {
            members.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
            for (rank, n) in members.into_iter().enumerate() {
                kappa[n] = rank;
            }
        }
        kappa
    }

    /// Reassign a single user.
    pub fn with_move(&self, user: usize, group: usize) -> Self {
        let mut next = self.clone();
        next.group_of[user] = group;
        next
    }

    pub(crate) fn set(&mut self, user: usize, group: usize) {
        self.group_of[user] = group;
    }

    /// FNV-1a hash of the assignment vector, used in traces.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(self.num_groups as u64);
        for &g in &self.group_of {
            eat(g as u64);
        }
        h
    }

    /// Every grouping of `n` users into `g` groups, in lexicographic order.
    pub fn enumerate(n: usize, g: usize) -> impl Iterator<Item = Grouping> {
        let total = (g as u128).pow(n as u32);
        (0..total).map(move |mut code| {
            let mut group_of = vec![0; n];
            for slot in group_of.iter_mut() {
                *slot = (code % g as u128) as usize;
                code /= g as u128;
            }
            Grouping { num_groups: g, group_of }
        })
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.group_of.iter().map(|g| g.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}
