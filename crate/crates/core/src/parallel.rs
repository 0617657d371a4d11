//! Domain decomposition with ghost-cell exchange.
//!
//! The grid is cut into a `px x py` array of rectangular tiles, one per
//! worker thread. Every worker runs the serial kernels on its tile after
//! its halo (ghost) cells have been filled: first from the x neighbors,
//! then from the y neighbors over the full ghosted width, which fills the
//! corners without diagonal links. Sides on the physical boundary are filled
//! by the boundary conditions. Workers talk only through channels.

use std::collections::{HashMap, VecDeque};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::{Duration, Instant};

use crate::controller::{prepare, time_loop, Comm, Frame, FrameSink, Problem, RunConfig, RunSummary};
use crate::error::{Error, Result};
use crate::geometry::{fill_dimension, BoundarySpec, Dimension, State};

/// Neighbor across one tile side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Worker(usize),
    Boundary,
}

/// Cells owned by one worker: `cols.0..cols.1` by `rows.0..rows.1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tile {
    pub cols: (usize, usize),
    pub rows: (usize, usize),
}

impl Tile {
    pub fn width(&self) -> usize {
        self.cols.1 - self.cols.0
    }

    pub fn height(&self) -> usize {
        self.rows.1 - self.rows.0
    }

    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        (self.cols.0..self.cols.1).contains(&i) && (self.rows.0..self.rows.1).contains(&j)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub mx: usize,
    pub my: usize,
    pub px: usize,
    pub py: usize,
    /// Worker `w = wy * px + wx`, numbered row-major from the bottom.
    pub tiles: Vec<Tile>,
    pub halo_width: usize,
    /// `[left, right, down, up]` per worker, ignoring periodicity.
    pub neighbors: Vec<[Neighbor; 4]>,
}

/// Splits `n` cells into `parts` runs, larger runs first; returns bounds.
fn split(n: usize, parts: usize) -> Vec<(usize, usize)> {
    let (base, extra) = (n / parts, n % parts);
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        out.push((start, start + len));
        start += len;
    }
    out
}

/// Worker grid and tiles for `workers` workers on an `mx x my` grid.
///
/// The worker grid `px x py` has `px * py = workers`, fits the grid, and has
/// the aspect ratio closest to `mx / my`; ties prefer the larger `px`.
pub fn partition(mx: usize, my: usize, workers: usize, halo_width: usize) -> Result<Partition> {
    if workers == 0 || mx == 0 || my == 0 {
        return Err(Error::Parallel(format!("cannot partition {mx}x{my} cells over {workers} workers")));
    }
    let target = (mx as f64 / my as f64).ln();
    let mut best: Option<(usize, usize, f64)> = None;
    for px in (1..=workers).rev() {
        if !workers.is_multiple_of(px) {
            continue;
        }
        let py = workers / px;
        if px > mx || py > my {
            continue;
        }
        let score = ((px as f64 / py as f64).ln() - target).abs();
        if best.is_none_or(|b| score < b.2 - 1e-12) {
            best = Some((px, py, score));
        }
    }
    let (px, py, _) = best.ok_or_else(|| {
        Error::Parallel(format!("no worker grid for {workers} workers fits a {mx}x{my} grid"))
    })?;
    let cols = split(mx, px);
    let rows = split(my, py);
    let mut tiles = Vec::with_capacity(workers);
    let mut neighbors = Vec::with_capacity(workers);
    for wy in 0..py {
        for wx in 0..px {
            tiles.push(Tile {
                cols: cols[wx],
                rows: rows[wy],
            });
            let at = |cond: bool, w: usize| if cond { Neighbor::Worker(w) } else { Neighbor::Boundary };
            let w = wy * px + wx;
            neighbors.push([
                at(wx > 0, w.wrapping_sub(1)),
                at(wx + 1 < px, w + 1),
                at(wy > 0, w.wrapping_sub(px)),
                at(wy + 1 < py, w + px),
            ]);
        }
    }
    Ok(Partition {
        mx,
        my,
        px,
        py,
        tiles,
        halo_width,
        neighbors,
    })
}

impl Partition {
    pub fn num_workers(&self) -> usize {
        self.tiles.len()
    }

    pub fn worker_of(&self, i: usize, j: usize) -> usize {
        self.tiles.iter().position(|t| t.contains(i, j)).expect("cell inside the grid")
    }

    /// Exchange partner across `side` (0 left, 1 right, 2 down, 3 up),
    /// wrapping around periodic dimensions split over several workers.
    pub fn exchange_partner(&self, worker: usize, side: usize, periodic: [bool; 2]) -> Option<usize> {
        match self.neighbors[worker][side] {
            Neighbor::Worker(w) => Some(w),
            Neighbor::Boundary => {
                let (wx, wy) = (worker % self.px, worker / self.px);
                let (dim, count) = if side < 2 { (0, self.px) } else { (1, self.py) };
                if !periodic[dim] || count == 1 {
                    return None;
                }
                Some(match side {
                    0 => wy * self.px + self.px - 1,
                    1 => wy * self.px,
                    2 => (self.py - 1) * self.px + wx,
                    _ => wx,
                })
            }
        }
    }

    pub fn index_maps(&self) -> IndexMaps {
        IndexMaps::new(self)
    }
}

/// Natural, global and local numberings of the cells of a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMaps {
    mx: usize,
    natural_to_global: Vec<usize>,
    global_to_natural: Vec<usize>,
    /// First global index owned by each worker.
    offsets: Vec<usize>,
}

/// One entry of a worker's local numbering over owned and halo cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalCell {
    pub local: usize,
    /// Natural index, `None` for halo cells outside the domain.
    pub natural: Option<usize>,
    pub halo: bool,
}

impl IndexMaps {
    pub fn new(part: &Partition) -> Self {
        let n = part.mx * part.my;
        let mut natural_to_global = vec![0; n];
        let mut global_to_natural = vec![0; n];
        let mut offsets = Vec::with_capacity(part.num_workers());
        let mut next = 0;
        for tile in &part.tiles {
            offsets.push(next);
            for j in tile.rows.0..tile.rows.1 {
                for i in tile.cols.0..tile.cols.1 {
                    let nat = j * part.mx + i;
                    natural_to_global[nat] = next;
                    global_to_natural[next] = nat;
                    next += 1;
                }
            }
        }
        Self {
            mx: part.mx,
            natural_to_global,
            global_to_natural,
            offsets,
        }
    }

    pub fn natural(&self, i: usize, j: usize) -> usize {
        j * self.mx + i
    }

    pub fn natural_to_global(&self, idx: usize) -> Result<usize> {
        self.natural_to_global
            .get(idx)
            .copied()
            .ok_or_else(|| Error::Parallel(format!("natural index {idx} out of range")))
    }

    pub fn global_to_natural(&self, idx: usize) -> Result<usize> {
        self.global_to_natural
            .get(idx)
            .copied()
            .ok_or_else(|| Error::Parallel(format!("global index {idx} out of range")))
    }

    /// Global indices owned by `worker`.
    pub fn global_range(&self, worker: usize) -> std::ops::Range<usize> {
        let end = self.offsets.get(worker + 1).copied().unwrap_or(self.natural_to_global.len());
        self.offsets[worker]..end
    }

    /// Local numbering of `worker`'s owned and halo cells, x fastest.
    pub fn local_cells(&self, part: &Partition, worker: usize) -> Vec<LocalCell> {
        let tile = part.tiles[worker];
        let h = part.halo_width as isize;
        let mut out = Vec::new();
        for j in tile.rows.0 as isize - h..tile.rows.1 as isize + h {
            for i in tile.cols.0 as isize - h..tile.cols.1 as isize + h {
                let inside = i >= 0 && j >= 0 && (i as usize) < part.mx && (j as usize) < part.my;
                let owned = inside && tile.contains(i as usize, j as usize);
                out.push(LocalCell {
                    local: out.len(),
                    natural: inside.then(|| j as usize * part.mx + i as usize),
                    halo: !owned,
                });
            }
        }
        out
    }
}

/// Message kinds; halo messages carry the dimension and the side of the
/// sender's tile the strip was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Tag {
    Halo { dim: usize, from_upper: bool, aux: bool },
    Reduce,
    Gather,
    Abort,
}

#[derive(Debug)]
struct Msg {
    from: usize,
    tag: Tag,
    data: Vec<f64>,
}

/// Channel endpoint of one worker.
pub struct Mailbox {
    rank: usize,
    peers: Vec<Sender<Msg>>,
    inbox: Receiver<Msg>,
    stash: HashMap<(usize, Tag), VecDeque<Vec<f64>>>,
    timeout: Duration,
}

/// Fully connected mailboxes for `n` workers.
pub fn mailboxes(n: usize, timeout: Duration) -> Vec<Mailbox> {
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..n).map(|_| channel()).unzip();
    receivers
        .into_iter()
        .enumerate()
        .map(|(rank, inbox)| Mailbox {
            rank,
            peers: senders.clone(),
            inbox,
            stash: HashMap::new(),
            timeout,
        })
        .collect()
}

impl Mailbox {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.peers.len()
    }

    fn send(&self, to: usize, tag: Tag, data: Vec<f64>) -> Result<()> {
        // a closed peer has already failed; the receive side reports it
        let _ = self.peers[to].send(Msg {
            from: self.rank,
            tag,
            data,
        });
        Ok(())
    }

    fn recv(&mut self, from: usize, tag: Tag) -> Result<Vec<f64>> {
        if let Some(v) = self.stash.get_mut(&(from, tag)).and_then(VecDeque::pop_front) {
            return Ok(v);
        }
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.inbox.recv_timeout(left) {
                Ok(msg) if msg.tag == Tag::Abort => {
                    return Err(Error::Parallel(format!("worker {} aborted the run", msg.from)));
                }
                Ok(msg) if msg.from == from && msg.tag == tag => return Ok(msg.data),
                Ok(msg) => self.stash.entry((msg.from, msg.tag)).or_default().push_back(msg.data),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(Error::Parallel(format!(
                        "worker {} timed out waiting for worker {from} ({tag:?})",
                        self.rank
                    )));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::Parallel("all peers disconnected".into()));
                }
            }
        }
    }

    /// Tells every other worker to stop.
    pub fn abort(&self) {
        for to in 0..self.size() {
            if to != self.rank {
                let _ = self.send(to, Tag::Abort, Vec::new());
            }
        }
    }

    /// Maximum of one value per worker, delivered to all.
    pub fn reduce_max(&mut self, value: f64) -> Result<f64> {
        for to in 0..self.size() {
            if to != self.rank {
                self.send(to, Tag::Reduce, vec![value])?;
            }
        }
        let mut max = value;
        for from in 0..self.size() {
            if from != self.rank {
                let v = self.recv(from, Tag::Reduce)?[0];
                // NaN must win so that every worker rejects together
                if v > max || v.is_nan() {
                    max = v;
                }
            }
        }
        Ok(max)
    }
}

/// Ghost filling and reductions for one tile.
pub struct TileComm<'a> {
    pub mailbox: Mailbox,
    pub partition: &'a Partition,
    pub bc: &'a BoundarySpec,
    /// Full-domain dimensions, for gathered frames.
    pub domain: &'a [Dimension],
}

impl TileComm<'_> {
    fn worker(&self) -> usize {
        self.mailbox.rank
    }

    fn partner(&self, side: usize) -> Option<usize> {
        let periodic = [self.bc.is_periodic(0), self.bc.rank() > 1 && self.bc.is_periodic(1)];
        self.partition.exchange_partner(self.worker(), side, periodic)
    }

    /// Fills halos of `q` (and of `aux` when `with_aux`) from neighbors and
    /// physical ghosts from the boundary conditions, x first then y.
    pub fn exchange(&mut self, state: &mut State, with_aux: bool) -> Result<()> {
        let g = state.num_ghost();
        if g != self.partition.halo_width {
            return Err(Error::Parallel(format!(
                "state has {g} ghost layers, partition expects {}",
                self.partition.halo_width
            )));
        }
        for dim in 0..state.rank() {
            let partners = [self.partner(2 * dim), self.partner(2 * dim + 1)];
            for aux in [false, true] {
                if aux && !(with_aux && state.num_aux() > 0) {
                    continue;
                }
                for (s, p) in partners.iter().enumerate() {
                    if let Some(to) = *p {
                        let data = strip(state, dim, s == 1, false, aux);
                        self.mailbox.send(
                            to,
                            Tag::Halo {
                                dim,
                                from_upper: s == 1,
                                aux,
                            },
                            data,
                        )?;
                    }
                }
                for (s, p) in partners.iter().enumerate() {
                    if let Some(from) = *p {
                        // our lower halo comes from the partner's upper strip
                        let tag = Tag::Halo {
                            dim,
                            from_upper: s == 0,
                            aux,
                        };
                        let data = self.mailbox.recv(from, tag)?;
                        write_strip(state, dim, s == 1, aux, &data)?;
                    }
                }
            }
            let physical = [partners[0].is_none(), partners[1].is_none()];
            if physical.iter().any(|&b| b) {
                fill_dimension(state, self.bc, dim, physical)?;
            }
        }
        Ok(())
    }
}

/// Cells of the strip adjacent to one side of a tile: the `g` owned layers
/// (`halo = false`) or the `g` ghost layers (`halo = true`). Dimension 0
/// strips span interior rows, dimension 1 strips the full ghosted width.
fn strip_cells(state: &State, dim: usize, upper: bool, halo: bool) -> Vec<(usize, usize)> {
    let g = state.num_ghost();
    let [nx, _] = state.patch().ghosted_shape();
    let [mx, my] = state.patch().interior_shape();
    let oy = state.patch().interior_offset()[1];
    let n = if dim == 0 { mx } else { my };
    let layers: Vec<usize> = match (upper, halo) {
        (false, false) => (g..2 * g).collect(),
        (false, true) => (0..g).collect(),
        (true, false) => (n..n + g).collect(),
        (true, true) => (n + g..n + 2 * g).collect(),
    };
    let mut out = Vec::new();
    if dim == 0 {
        for j in oy..oy + my {
            for &i in &layers {
                out.push((i, j));
            }
        }
    } else {
        for &j in &layers {
            for i in 0..nx {
                out.push((i, j));
            }
        }
    }
    out
}

fn strip(state: &State, dim: usize, upper: bool, halo: bool, aux: bool) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, j) in strip_cells(state, dim, upper, halo) {
        out.extend_from_slice(if aux { state.aux_cell(i, j) } else { state.q_cell(i, j) });
    }
    out
}

fn write_strip(state: &mut State, dim: usize, upper: bool, aux: bool, data: &[f64]) -> Result<()> {
    let cells = strip_cells(state, dim, upper, true);
    let m = if aux { state.num_aux() } else { state.num_eqn() };
    if data.len() != cells.len() * m {
        return Err(Error::Parallel(format!(
            "halo strip holds {} values, expected {} (mismatched halo widths?)",
            data.len(),
            cells.len() * m
        )));
    }
    for (c, (i, j)) in cells.into_iter().enumerate() {
        let dst = if aux { state.aux_cell_mut(i, j) } else { state.q_cell_mut(i, j) };
        dst.copy_from_slice(&data[c * m..(c + 1) * m]);
    }
    Ok(())
}

impl Comm for TileComm<'_> {
    fn fill_ghosts(&mut self, state: &mut State) -> Result<()> {
        self.exchange(state, false)
    }

    fn reduce_max(&mut self, value: f64) -> Result<f64> {
        self.mailbox.reduce_max(value)
    }

    fn gather(&mut self, state: &State) -> Result<Option<Frame>> {
        let local = state.interior_q();
        if self.worker() != 0 {
            self.mailbox.send(0, Tag::Gather, local)?;
            return Ok(None);
        }
        let mut parts = vec![local];
        for from in 1..self.mailbox.size() {
            parts.push(self.mailbox.recv(from, Tag::Gather)?);
        }
        let q = gather_natural(&parts, self.partition, state.num_eqn());
        Ok(Some(Frame {
            t: state.t,
            dims: self
                .domain
                .iter()
                .map(|d| (d.num_cells(), d.lower(), d.upper()))
                .collect(),
            num_eqn: state.num_eqn(),
            q,
        }))
    }
}

/// Assembles per-worker interior arrays into natural order.
pub fn gather_natural(parts: &[Vec<f64>], part: &Partition, num_eqn: usize) -> Vec<f64> {
    let mut out = vec![0.0; part.mx * part.my * num_eqn];
    for (tile, data) in part.tiles.iter().zip(parts) {
        let w = tile.width();
        for (r, j) in (tile.rows.0..tile.rows.1).enumerate() {
            let src = &data[r * w * num_eqn..(r + 1) * w * num_eqn];
            let dst = (j * part.mx + tile.cols.0) * num_eqn;
            out[dst..dst + w * num_eqn].copy_from_slice(src);
        }
    }
    out
}

/// Splits a natural-order array into per-worker interior arrays.
pub fn scatter_natural(full: &[f64], part: &Partition, num_eqn: usize) -> Vec<Vec<f64>> {
    part.tiles
        .iter()
        .map(|tile| {
            let w = tile.width();
            let mut v = Vec::with_capacity(tile.len() * num_eqn);
            for j in tile.rows.0..tile.rows.1 {
                let s = (j * part.mx + tile.cols.0) * num_eqn;
                v.extend_from_slice(&full[s..s + w * num_eqn]);
            }
            v
        })
        .collect()
}

/// Tile dimensions of `worker`.
pub fn tile_dims(domain: &[Dimension], part: &Partition, worker: usize) -> Result<Vec<Dimension>> {
    let tile = part.tiles[worker];
    let mut dims = vec![domain[0].subrange(tile.cols.0, tile.width())?];
    if domain.len() > 1 {
        dims.push(domain[1].subrange(tile.rows.0, tile.height())?);
    }
    Ok(dims)
}

const TIMEOUT: Duration = Duration::from_secs(300);

/// Runs `f` on one thread per tile with connected mailboxes; returns the
/// results in worker order. The first genuine failure wins over the
/// resulting aborts on other workers.
pub fn run_workers<T: Send>(
    part: &Partition,
    f: impl Fn(usize, Mailbox) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let boxes = mailboxes(part.num_workers(), TIMEOUT);
    let f = &f;
    let results: Vec<Result<T>> = thread::scope(|scope| {
        let handles: Vec<_> = boxes
            .into_iter()
            .enumerate()
            .map(|(w, mb)| {
                let peers: Vec<Sender<Msg>> = mb.peers.clone();
                scope.spawn(move || {
                    let out = f(w, mb);
                    if out.is_err() {
                        for (to, p) in peers.iter().enumerate() {
                            if to != w {
                                let _ = p.send(Msg {
                                    from: w,
                                    tag: Tag::Abort,
                                    data: Vec::new(),
                                });
                            }
                        }
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Parallel("worker panicked".into()))))
            .collect()
    });
    let mut first_abort = None;
    let mut ok = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(Error::Parallel(msg)) if msg.contains("aborted") => {
                first_abort.get_or_insert(Error::Parallel(msg));
            }
            Err(e) => return Err(e),
        }
    }
    match first_abort {
        Some(e) => Err(e),
        None => Ok(ok),
    }
}

/// Fills the halos of a set of tile states (one per worker) in parallel.
pub fn exchange_halos(tiles: Vec<State>, part: &Partition, bc: &BoundarySpec, domain: &[Dimension]) -> Result<Vec<State>> {
    let slots: Vec<std::sync::Mutex<Option<State>>> = tiles.into_iter().map(|s| std::sync::Mutex::new(Some(s))).collect();
    run_workers(part, |w, mailbox| {
        let mut state = slots[w].lock().expect("tile slot").take().expect("one state per worker");
        let mut comm = TileComm {
            mailbox,
            partition: part,
            bc,
            domain,
        };
        comm.exchange(&mut state, true)?;
        Ok(state)
    })
}

/// Runs a problem on `workers` tiles. Frames are gathered to worker 0 and
/// are identical to those of a single-patch run.
pub fn run_parallel(problem: &Problem, cfg: &RunConfig, workers: usize) -> Result<RunSummary> {
    let start = Instant::now();
    // validates the problem and configuration on the full domain
    prepare(problem, cfg)?;
    let g = cfg.solver.num_ghost()?;
    let mx = problem.dims[0].num_cells();
    let my = problem.dims.get(1).map_or(1, Dimension::num_cells);
    let part = partition(mx, my, workers, g)?;
    let periodic = [problem.bc.is_periodic(0), problem.rank() > 1 && problem.bc.is_periodic(1)];
    for (w, tile) in part.tiles.iter().enumerate() {
        let needs = |side: usize| part.exchange_partner(w, side, periodic).is_some();
        if (tile.width() < g && (needs(0) || needs(1))) || (tile.height() < g && (needs(2) || needs(3))) {
            return Err(Error::Parallel(format!(
                "tile {w} ({}x{}) is narrower than the {g}-cell halo",
                tile.width(),
                tile.height()
            )));
        }
    }

    let results = run_workers(&part, |w, mailbox| {
        let mut state = problem.init_state(tile_dims(&problem.dims, &part, w)?, g)?;
        let mut comm = TileComm {
            mailbox,
            partition: &part,
            bc: &problem.bc,
            domain: &problem.dims,
        };
        comm.exchange(&mut state, true)?;
        state.validate_capacity()?;
        let mut sink = FrameSink::new(cfg.outdir.clone(), cfg.keep_frames);
        let stats = time_loop(problem, cfg, &mut state, &mut comm, &mut |j, f| sink.push(j, f))?;
        Ok((stats, sink))
    })?;
    let (stats, sink) = results.into_iter().next().expect("worker 0");
    Ok(RunSummary {
        stats,
        manifest: sink.manifest,
        frames: sink.frames,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_bcs, BoundaryCondition, Patch};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn figure_mesh_partition_and_numbering() {
        let p = partition(5, 6, 4, 1).unwrap();
        assert_eq!((p.px, p.py), (2, 2));
        assert_eq!(p.tiles[0], Tile { cols: (0, 3), rows: (0, 3) });
        assert_eq!(p.tiles[3], Tile { cols: (3, 5), rows: (3, 6) });
        let maps = p.index_maps();
        assert_eq!(maps.natural_to_global(10).unwrap(), 6);
        assert_eq!(maps.natural_to_global(18).unwrap(), 24);
        assert_eq!(maps.natural_to_global(0).unwrap(), 0);
        assert!(maps.natural_to_global(30).is_err());
        assert_eq!(maps.global_range(1), 9..15);
        // local numbering of worker 0 covers owned plus one halo layer
        let local = maps.local_cells(&p, 0);
        assert_eq!(local.len(), 25);
        assert_eq!(local.iter().filter(|c| !c.halo).count(), 9);
        let owned: Vec<usize> = local
            .iter()
            .filter(|c| !c.halo)
            .map(|c| maps.natural_to_global(c.natural.unwrap()).unwrap())
            .collect();
        assert_eq!(owned, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn partition_examples() {
        let one = partition(7, 3, 1, 2).unwrap();
        assert_eq!(one.tiles, vec![Tile { cols: (0, 7), rows: (0, 3) }]);
        let four = partition(8, 8, 4, 2).unwrap();
        assert!(four.tiles.iter().all(|t| t.width() == 4 && t.height() == 4));
        assert!(partition(2, 2, 5, 1).is_err());
        // 1D grids only split along x
        let line = partition(100, 1, 4, 2).unwrap();
        assert_eq!((line.px, line.py), (4, 1));
    }

    #[test]
    fn random_partitions_cover_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 200 {
            let mx = rng.gen_range(1..60);
            let my = rng.gen_range(1..60);
            let w = rng.gen_range(1..17);
            let Ok(p) = partition(mx, my, w, 2) else {
                continue;
            };
            let mut count = vec![0u8; mx * my];
            for t in &p.tiles {
                for j in t.rows.0..t.rows.1 {
                    for i in t.cols.0..t.cols.1 {
                        count[j * mx + i] += 1;
                    }
                }
            }
            assert!(count.iter().all(|&c| c == 1), "{mx}x{my}/{w}");
            let widths: Vec<usize> = p.tiles.iter().map(Tile::width).collect();
            let heights: Vec<usize> = p.tiles.iter().map(Tile::height).collect();
            assert!(widths.iter().max().unwrap() - widths.iter().min().unwrap() <= 1);
            assert!(heights.iter().max().unwrap() - heights.iter().min().unwrap() <= 1);
            assert_eq!(p, partition(mx, my, w, 2).unwrap());
            let maps = p.index_maps();
            let mut seen = vec![false; mx * my];
            for n in 0..mx * my {
                let g = maps.natural_to_global(n).unwrap();
                assert!(!seen[g]);
                seen[g] = true;
                assert_eq!(maps.global_to_natural(g).unwrap(), n);
            }
            checked += 1;
        }
    }

    fn domain(mx: usize, my: usize) -> Vec<Dimension> {
        vec![
            Dimension::new("x", 0.0, 1.0, mx).unwrap(),
            Dimension::new("y", -1.0, 2.0, my).unwrap(),
        ]
    }

    fn field(i: usize, j: usize) -> [f64; 2] {
        [(i * 100 + j) as f64 + 0.25, (i as f64).sin() * (j as f64 + 1.0)]
    }

    fn tiles_for(dims: &[Dimension], part: &Partition, g: usize) -> Vec<State> {
        (0..part.num_workers())
            .map(|w| {
                let mut s = State::new(Patch::new(tile_dims(dims, part, w).unwrap(), g).unwrap(), 2, 1);
                let t = part.tiles[w];
                for (i, j) in s.interior_cells().collect::<Vec<_>>() {
                    let (gi, gj) = (t.cols.0 + i - g, t.rows.0 + j - g);
                    s.q_cell_mut(i, j).copy_from_slice(&field(gi, gj));
                    s.aux_cell_mut(i, j)[0] = (gi + 7 * gj) as f64;
                }
                s
            })
            .collect()
    }

    fn check_against_serial(bc: BoundarySpec, mx: usize, my: usize, workers: usize, g: usize) {
        let dims = domain(mx, my);
        let part = partition(mx, my, workers, g).unwrap();
        let mut serial = State::new(Patch::new(dims.clone(), g).unwrap(), 2, 1);
        for (i, j) in serial.interior_cells().collect::<Vec<_>>() {
            serial.q_cell_mut(i, j).copy_from_slice(&field(i - g, j - g));
            serial.aux_cell_mut(i, j)[0] = (i - g + 7 * (j - g)) as f64;
        }
        apply_bcs(&mut serial, &bc, g).unwrap();
        let tiles = exchange_halos(tiles_for(&dims, &part, g), &part, &bc, &dims).unwrap();
        for (w, s) in tiles.iter().enumerate() {
            let t = part.tiles[w];
            let [nx, ny] = s.patch().ghosted_shape();
            for j in 0..ny {
                for i in 0..nx {
                    let (gi, gj) = (t.cols.0 + i, t.rows.0 + j);
                    assert_eq!(s.q_cell(i, j), serial.q_cell(gi, gj), "worker {w} cell ({i},{j})");
                    assert_eq!(s.aux_cell(i, j), serial.aux_cell(gi, gj), "aux worker {w} cell ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn exchange_matches_serial_ghost_fill() {
        let periodic = BoundarySpec::uniform(2, BoundaryCondition::Periodic).unwrap();
        let mixed = BoundarySpec::new(vec![
            [
                BoundaryCondition::Custom(Arc::new(|cell, out| {
                    out[0] = cell.center[1] + cell.layer as f64;
                    out[1] = cell.nearest[1] * cell.t;
                    Ok(())
                })),
                BoundaryCondition::Extrapolation,
            ],
            [BoundaryCondition::Wall { reflect: vec![1] }, BoundaryCondition::Extrapolation],
        ])
        .unwrap();
        for (mx, my, w) in [(5, 6, 4), (9, 7, 2), (12, 10, 6), (8, 8, 1), (13, 11, 9)] {
            check_against_serial(periodic.clone(), mx, my, w, 2);
            check_against_serial(mixed.clone(), mx, my, w, 2);
        }
        check_against_serial(periodic, 16, 12, 4, 3);
    }

    #[test]
    fn side_by_side_copy_semantics() {
        let dims = domain(4, 3);
        let part = partition(4, 3, 2, 1).unwrap();
        assert_eq!((part.px, part.py), (2, 1));
        let bc = BoundarySpec::uniform(2, BoundaryCondition::Extrapolation).unwrap();
        let mut tiles = tiles_for(&dims, &part, 1);
        for (r, v) in [1.0, 2.0, 3.0].iter().enumerate() {
            tiles[0].q_cell_mut(2, r + 1)[0] = *v;
        }
        let tiles = exchange_halos(tiles, &part, &bc, &dims).unwrap();
        let col: Vec<f64> = (1..4).map(|j| tiles[1].q_cell(0, j)[0]).collect();
        assert_eq!(col, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn reductions() {
        let part = partition(16, 16, 4, 1).unwrap();
        let vals = [0.3, 0.7, 0.1, 0.7];
        let out = run_workers(&part, |w, mut mb| mb.reduce_max(vals[w])).unwrap();
        assert_eq!(out, vec![0.7; 4]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vals: Vec<f64> = (0..16).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let serial = vals.iter().cloned().fold(f64::MIN, f64::max);
        let part = partition(16, 16, 16, 1).unwrap();
        let out = run_workers(&part, |w, mut mb| {
            // several rounds in a row must not mix up
            let a = mb.reduce_max(vals[w])?;
            let b = mb.reduce_max(-vals[w])?;
            Ok((a, b))
        })
        .unwrap();
        let neg = vals.iter().map(|v| -v).fold(f64::MIN, f64::max);
        assert!(out.iter().all(|&(a, b)| a == serial && b == neg));

        let single = partition(4, 4, 1, 1).unwrap();
        assert_eq!(run_workers(&single, |_, mut mb| mb.reduce_max(0.42)).unwrap(), vec![0.42]);
    }

    #[test]
    fn failing_worker_aborts_everyone() {
        let part = partition(16, 16, 4, 1).unwrap();
        let err = run_workers(&part, |w, mut mb| {
            if w == 2 {
                return Err(Error::Config("worker two fails".into()));
            }
            mb.reduce_max(1.0)
        })
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn gather_scatter_round_trip() {
        let part = partition(5, 6, 4, 1).unwrap();
        let full: Vec<f64> = (0..60).map(|v| v as f64).collect();
        let parts = scatter_natural(&full, &part, 2);
        assert_eq!(parts[0].len(), 18);
        assert_eq!(gather_natural(&parts, &part, 2), full);
        let one = partition(5, 6, 1, 1).unwrap();
        assert_eq!(gather_natural(&scatter_natural(&full, &one, 2), &one, 2), full);
    }

    fn acoustics_problem(mx: usize, my: usize) -> Problem {
        use crate::riemann::Acoustics;
        let dims = vec![
            Dimension::new("x", -1.0, 1.0, mx).unwrap(),
            Dimension::new("y", -1.0, 1.0, my).unwrap(),
        ];
        let bc = BoundarySpec::new(vec![
            [BoundaryCondition::Wall { reflect: vec![1] }, BoundaryCondition::Extrapolation],
            [BoundaryCondition::Periodic, BoundaryCondition::Periodic],
        ])
        .unwrap();
        Problem::new(
            "acoustics",
            dims,
            Arc::new(Acoustics::new(2).unwrap()),
            bc,
            Arc::new(|c, q| {
                let r2 = (c.center[0] - 0.2).powi(2) + (c.center[1] + 0.1).powi(2);
                q[0] = if r2 < 0.16 { 1.0 + (4.0 * r2).cos() } else { 0.0 };
                q[1] = 0.0;
                q[2] = 0.0;
            }),
        )
        .with_aux(
            2,
            Arc::new(|c, a| {
                let fast = c.center[0] > 0.3 * c.center[1];
                a[0] = if fast { 1.0 } else { 2.0 };
                a[1] = if fast { 4.0 } else { 1.0 };
            }),
        )
    }

    #[test]
    fn frames_identical_to_serial() {
        use crate::classic::ClassicConfig;
        use crate::controller::{run, SolverKind};
        use crate::sharpclaw::{Integrator, SharpClawConfig};
        let problem = acoustics_problem(24, 18);
        let solvers = [
            SolverKind::Classic(ClassicConfig::default()),
            SolverKind::SharpClaw(SharpClawConfig::new(5, Integrator::SSP104)),
        ];
        for solver in solvers {
            let mut cfg = RunConfig::new(solver, 0.3, 3);
            cfg.keep_frames = true;
            // a large first step forces a rejection on every layout
            cfg.dt_initial = Some(0.2);
            let serial = run(&problem, &cfg).unwrap();
            assert!(serial.stats.rejected > 0);
            for workers in [1, 2, 4] {
                let par = run_parallel(&problem, &cfg, workers).unwrap();
                assert_eq!(par.stats, serial.stats, "{workers} workers");
                assert_eq!(par.frames.len(), 4);
                for (a, b) in par.frames.iter().zip(&serial.frames) {
                    let (mut ta, mut tb) = (Vec::new(), Vec::new());
                    a.write_to(&mut ta).unwrap();
                    b.write_to(&mut tb).unwrap();
                    assert!(ta == tb, "{workers} workers, t = {}", a.t);
                }
            }
        }
    }

    #[test]
    fn tiles_smaller_than_halo_are_rejected() {
        use crate::controller::SolverKind;
        use crate::sharpclaw::{Integrator, SharpClawConfig};
        let problem = acoustics_problem(8, 8);
        let cfg = RunConfig::new(SolverKind::SharpClaw(SharpClawConfig::new(9, Integrator::SSP104)), 0.1, 1);
        let err = run_parallel(&problem, &cfg, 4).unwrap_err();
        assert!(err.to_string().contains("halo"), "{err}");
    }
}
