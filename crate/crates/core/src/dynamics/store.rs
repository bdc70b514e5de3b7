use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::qualifiers::Loc;
use crate::typecheck::Term;

#[derive(Clone, PartialEq, Debug)]
pub enum Cell {
    Live(Term),
    /// Tombstone left by a bulk kill.
    Killed,
}

impl Cell {
    pub fn is_live(&self) -> bool {
        matches!(self, Cell::Live(_))
    }
}

/// Two-dimensional store: a location names a column (an arena) whose
/// offsets are allocated contiguously from zero.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct Store {
    cells: BTreeMap<(Loc, u32), Cell>,
    next_loc: u32,
    next_offset: BTreeMap<Loc, u32>,
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    /// Allocates `ℓ·0` in a fresh column.
    pub fn alloc_fresh(&mut self, value: Term) -> Loc {
        let l = Loc(self.next_loc);
        self.next_loc += 1;
        self.cells.insert((l, 0), Cell::Live(value));
        self.next_offset.insert(l, 1);
        l
    }

    /// Appends a cell to an existing column, returning its offset.
    pub fn alloc_at(&mut self, l: Loc, value: Term) -> u32 {
        let next = self.next_offset.entry(l).or_insert(0);
        let o = *next;
        *next += 1;
        self.cells.insert((l, o), Cell::Live(value));
        o
    }

    pub fn get(&self, l: Loc, o: u32) -> Option<&Cell> {
        self.cells.get(&(l, o))
    }

    /// Overwrites a live cell. Returns false if the cell is absent or killed.
    pub fn set(&mut self, l: Loc, o: u32, value: Term) -> bool {
        match self.cells.get_mut(&(l, o)) {
            Some(cell @ Cell::Live(_)) => {
                *cell = Cell::Live(value);
                true
            }
            _ => false,
        }
    }

    /// Marks every cell of the column killed; returns how many were live.
    pub fn kill_column(&mut self, l: Loc) -> usize {
        let mut n = 0;
        for (_, cell) in self.cells.range_mut((l, 0)..=(l, u32::MAX)) {
            if cell.is_live() {
                n += 1;
            }
            *cell = Cell::Killed;
        }
        n
    }

    /// Test hook: revives a killed cell.
    #[doc(hidden)]
    pub fn force_cell(&mut self, l: Loc, o: u32, cell: Cell) {
        self.cells.insert((l, o), cell);
    }

    pub fn column(&self, l: Loc) -> impl Iterator<Item = (u32, &Cell)> {
        self.cells.range((l, 0)..=(l, u32::MAX)).map(|((_, o), c)| (*o, c))
    }

    pub fn cells(&self) -> impl Iterator<Item = ((Loc, u32), &Cell)> {
        self.cells.iter().map(|(k, c)| (*k, c))
    }

    /// `domℓ(σ)`: every location that has at least one cell, killed or not.
    pub fn locations(&self) -> BTreeSet<Loc> {
        self.cells.keys().map(|(l, _)| *l).collect()
    }

    pub fn column_killed(&self, l: Loc) -> bool {
        self.column(l).all(|(_, c)| !c.is_live())
    }

    pub fn live_count(&self) -> usize {
        self.cells.values().filter(|c| c.is_live()).count()
    }

    pub fn killed_count(&self) -> usize {
        self.cells.values().filter(|c| !c.is_live()).count()
    }

    pub fn total(&self) -> usize {
        self.cells.len()
    }

    /// Per-column (location, live cells, total cells).
    pub fn arenas(&self) -> Vec<(Loc, usize, usize)> {
        self.locations()
            .into_iter()
            .map(|l| {
                let live = self.column(l).filter(|(_, c)| c.is_live()).count();
                (l, live, self.column(l).count())
            })
            .collect()
    }
}

impl fmt::Display for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ((l, o), cell) in &self.cells {
            match cell {
                Cell::Live(v) => writeln!(f, "{l}·{o} ↦ {v}")?,
                Cell::Killed => writeln!(f, "{l}·{o} ↦ killed")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_are_contiguous_per_column() {
        let mut s = Store::new();
        let a = s.alloc_fresh(Term::int(7));
        let b = s.alloc_fresh(Term::int(1));
        assert_eq!(s.alloc_at(a, Term::int(8)), 1);
        assert_eq!(s.alloc_at(a, Term::int(9)), 2);
        assert_eq!(s.alloc_at(b, Term::int(2)), 1);
        assert_eq!(s.column(a).map(|(o, _)| o).collect::<Vec<_>>(), [0, 1, 2]);
    }

    #[test]
    fn bulk_kill_tombstones_whole_column() {
        let mut s = Store::new();
        let a = s.alloc_fresh(Term::int(7));
        s.alloc_at(a, Term::int(8));
        let b = s.alloc_fresh(Term::int(1));
        assert_eq!(s.kill_column(a), 2);
        assert!(s.column_killed(a));
        assert!(!s.column_killed(b));
        assert!(!s.set(a, 0, Term::int(3)));
        assert_eq!((s.live_count(), s.killed_count(), s.total()), (1, 2, 3));
    }
}
