//! Brute-force per-cycle event simulation of the MAC-line engines.
//!
//! Every job is queued as a chunk count on a specific line; the simulator
//! then ticks cycle by cycle, each busy line retiring one chunk per cycle,
//! until all queues drain. No closed-form arithmetic: the cycle count is
//! literally counted.

use std::collections::VecDeque;

use vitcod::sim::EngineAlloc;

pub struct EventEngine {
    lines: Vec<VecDeque<u64>>,
}

impl EventEngine {
    pub fn new(lines: u64) -> Self {
        Self {
            lines: (0..lines).map(|_| VecDeque::new()).collect(),
        }
    }

    /// Queue `jobs` of `chunk` cycles each, round-robin across the lines.
    pub fn enqueue_round_robin(&mut self, jobs: u64, chunk: u64) {
        let count = self.lines.len();
        for j in 0..jobs {
            self.lines[(j % count as u64) as usize].push_back(chunk);
        }
    }

    /// Queue `jobs` of `chunk` cycles each on one specific line.
    pub fn enqueue_on_line(&mut self, line: usize, jobs: u64, chunk: u64) {
        for _ in 0..jobs {
            self.lines[line].push_back(chunk);
        }
    }

    /// Tick until every line drains; returns the elapsed cycle count.
    pub fn run(&mut self) -> u64 {
        let mut cycles = 0u64;
        loop {
            let mut busy = false;
            for line in &mut self.lines {
                if let Some(front) = line.front_mut() {
                    busy = true;
                    *front -= 1;
                    if *front == 0 {
                        line.pop_front();
                    }
                }
            }
            if !busy {
                break;
            }
            cycles += 1;
        }
        cycles
    }
}

fn chunk_cycles(d_k: usize, macs_per_line: u64) -> u64 {
    (d_k as u64).div_ceil(macs_per_line)
}

/// Engines tick independently and synchronize at the phase barrier, so the
/// phase lasts as long as the slower engine. A lineless engine's jobs fold
/// onto the other engine's lines (single-MAC-line configurations).
pub fn event_sddmm_cycles(
    dense_scores: u64,
    sparse_scores: u64,
    alloc: EngineAlloc,
    h: u64,
    d_k: usize,
    macs_per_line: u64,
) -> u64 {
    let chunk = chunk_cycles(d_k, macs_per_line);
    let dense_jobs = dense_scores * h;
    let sparse_jobs = sparse_scores * h;
    let folded = (alloc.sparser_lines == 0 && sparse_jobs > 0)
        || (alloc.denser_lines == 0 && dense_jobs > 0);
    if folded {
        let mut engine = EventEngine::new(alloc.denser_lines.max(alloc.sparser_lines));
        engine.enqueue_round_robin(dense_jobs + sparse_jobs, chunk);
        return engine.run();
    }
    let mut denser = EventEngine::new(alloc.denser_lines.max(1));
    denser.enqueue_round_robin(dense_jobs, chunk);
    let mut sparser = EventEngine::new(alloc.sparser_lines.max(1));
    sparser.enqueue_round_robin(sparse_jobs, chunk);
    denser.run().max(sparser.run())
}

/// Output-stationary SpMM: row r of an engine's region belongs to line
/// `r % lines`; each head replays the row's nonzeros.
pub fn event_spmm_cycles(
    dense_row_jobs: &[u64],
    sparse_row_jobs: &[u64],
    alloc: EngineAlloc,
    h: u64,
    d_k: usize,
    macs_per_line: u64,
) -> u64 {
    let chunk = chunk_cycles(d_k, macs_per_line);
    let dense_total: u64 = dense_row_jobs.iter().sum();
    let sparse_total: u64 = sparse_row_jobs.iter().sum();
    let folded = (alloc.sparser_lines == 0 && sparse_total > 0)
        || (alloc.denser_lines == 0 && dense_total > 0);

    let enqueue_rows = |engine: &mut EventEngine, rows: &[u64], lines: u64| {
        for (r, &jobs) in rows.iter().enumerate() {
            for _head in 0..h {
                engine.enqueue_on_line(r % lines as usize, jobs, chunk);
            }
        }
    };

    if folded {
        let lines = alloc.denser_lines.max(alloc.sparser_lines);
        let mut engine = EventEngine::new(lines);
        let merged: Vec<u64> = dense_row_jobs
            .iter()
            .zip(sparse_row_jobs)
            .map(|(a, b)| a + b)
            .collect();
        enqueue_rows(&mut engine, &merged, lines);
        return engine.run();
    }
    let mut denser = EventEngine::new(alloc.denser_lines.max(1));
    if alloc.denser_lines > 0 {
        enqueue_rows(&mut denser, dense_row_jobs, alloc.denser_lines);
    }
    let mut sparser = EventEngine::new(alloc.sparser_lines.max(1));
    if alloc.sparser_lines > 0 {
        enqueue_rows(&mut sparser, sparse_row_jobs, alloc.sparser_lines);
    }
    denser.run().max(sparser.run())
}
