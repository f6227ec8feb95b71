//! Worker flags and the scheduler's state machine. The FSM is a pure data
//! structure: it consumes observed flags and emits commands, so it can be
//! driven directly in tests or by the scheduler PE program.
//!
//! The seven worker states are a reconstruction of the protocol; no
//! published state list exists to check them against.

use serde::{Deserialize, Serialize};

use crate::error::{MatmulError, Result};
use crate::plan::TilingPlan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[repr(u32)]
pub enum WorkerState {
    Idle = 0,
    Loaded = 1,
    Multiplying = 2,
    MultDone = 3,
    Accumulating = 4,
    Done = 5,
    Terminated = 6,
}

impl WorkerState {
    pub const ALL: [WorkerState; 7] = [
        WorkerState::Idle,
        WorkerState::Loaded,
        WorkerState::Multiplying,
        WorkerState::MultDone,
        WorkerState::Accumulating,
        WorkerState::Done,
        WorkerState::Terminated,
    ];

    pub fn from_code(code: u32) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn code(self) -> u32 {
        self as u32
    }

    /// Direct successors in the worker state graph.
    pub fn successors(self) -> &'static [WorkerState] {
        use WorkerState::*;
        match self {
            Idle => &[Loaded],
            Loaded => &[Multiplying],
            Multiplying => &[MultDone],
            MultDone => &[Accumulating, Done, Terminated],
            Accumulating => &[MultDone],
            Done => &[Terminated],
            Terminated => &[],
        }
    }

    pub fn is_edge(self, to: WorkerState) -> bool {
        self.successors().contains(&to)
    }

    /// Whether `to` is reachable in exactly `steps` edges. A polled flag may
    /// have advanced several times since the last poll.
    pub fn reaches(self, to: WorkerState, steps: u32) -> bool {
        let mut frontier = vec![self];
        for _ in 0..steps {
            let mut next: Vec<WorkerState> = frontier
                .iter()
                .flat_map(|s| s.successors().iter().copied())
                .collect();
            next.sort();
            next.dedup();
            if next.is_empty() {
                return false;
            }
            frontier = next;
        }
        frontier.contains(&to)
    }
}

/// The flag a worker writes into the scheduler's SRAM: 8 bytes, state code
/// then epoch, both little-endian u32.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerFlag {
    pub task: usize,
    pub state: WorkerState,
    pub epoch: u32,
}

pub const FLAG_BYTES: u32 = 8;

impl WorkerFlag {
    pub fn encode(state: WorkerState, epoch: u32) -> [u8; 8] {
        let mut b = [0u8; 8];
        b[..4].copy_from_slice(&state.code().to_le_bytes());
        b[4..].copy_from_slice(&epoch.to_le_bytes());
        b
    }

    pub fn decode(task: usize, bytes: &[u8]) -> Result<Self> {
        let code = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes"));
        let epoch = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        let state = WorkerState::from_code(code)
            .ok_or_else(|| MatmulError::Protocol(format!("task {task}: bad state code {code}")))?;
        Ok(Self { task, state, epoch })
    }
}

pub const IRQ_START: u32 = 0x100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Command {
    Load { task: usize, slot: usize },
    Multiply { task: usize },
    /// `task` fetches and adds the partial result `partner` left in slot
    /// `partner_slot` of physical worker `partner_worker`.
    Accumulate {
        task: usize,
        partner: usize,
        partner_worker: usize,
        partner_slot: usize,
    },
    Writeback { task: usize },
    Terminate { task: usize },
}

impl Command {
    pub fn task(&self) -> usize {
        match *self {
            Command::Load { task, .. }
            | Command::Multiply { task }
            | Command::Accumulate { task, .. }
            | Command::Writeback { task }
            | Command::Terminate { task } => task,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Load { .. } => "load",
            Command::Multiply { .. } => "multiply",
            Command::Accumulate { .. } => "accumulate",
            Command::Writeback { .. } => "writeback",
            Command::Terminate { .. } => "terminate",
        }
    }

    /// State the worker reports once the command has been carried out.
    pub fn completes_in(&self) -> WorkerState {
        match self {
            Command::Load { .. } => WorkerState::Loaded,
            Command::Multiply { .. } | Command::Accumulate { .. } => WorkerState::MultDone,
            Command::Writeback { .. } => WorkerState::Done,
            Command::Terminate { .. } => WorkerState::Terminated,
        }
    }

    /// IRQ code and arguments.
    pub fn to_irq(&self) -> (u32, Vec<u32>) {
        match *self {
            Command::Load { task, slot } => (1, vec![task as u32, slot as u32]),
            Command::Multiply { task } => (2, vec![task as u32]),
            Command::Accumulate {
                task,
                partner,
                partner_worker,
                partner_slot,
            } => (
                3,
                vec![
                    task as u32,
                    partner as u32,
                    partner_worker as u32,
                    partner_slot as u32,
                ],
            ),
            Command::Writeback { task } => (4, vec![task as u32]),
            Command::Terminate { task } => (5, vec![task as u32]),
        }
    }

    pub fn from_irq(code: u32, args: &[u32]) -> Option<Self> {
        let a = |i: usize| args.get(i).map(|&v| v as usize);
        Some(match (code, args.len()) {
            (1, 2) => Command::Load {
                task: a(0)?,
                slot: a(1)?,
            },
            (2, 1) => Command::Multiply { task: a(0)? },
            (3, 4) => Command::Accumulate {
                task: a(0)?,
                partner: a(1)?,
                partner_worker: a(2)?,
                partner_slot: a(3)?,
            },
            (4, 1) => Command::Writeback { task: a(0)? },
            (5, 1) => Command::Terminate { task: a(0)? },
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct StepState {
    issued: bool,
    done: bool,
    partner_terminated: bool,
}

#[derive(Clone, Debug)]
struct TaskState {
    state: WorkerState,
    epoch: u32,
    slot: Option<usize>,
    /// Command in flight and the epoch seen when it was issued.
    pending: Option<(Command, u32)>,
    /// Combine steps completed with this task as accumulator.
    combines_done: usize,
    writeback_issued: bool,
}

/// Scheduler-side view of every task, plus the per-group combine schedule.
#[derive(Clone, Debug)]
pub struct SchedulerFsm {
    plan: TilingPlan,
    tasks: Vec<TaskState>,
    steps: Vec<Vec<StepState>>,
    /// Per physical worker: slot occupancy and the task currently between
    /// LOAD and MULT_DONE, if any.
    slots: Vec<Vec<bool>>,
    computing: Vec<Option<usize>>,
    next_load: usize,
    /// Per task: combine steps where it accumulates, and how many.
    accumulates: Vec<usize>,
    issued: Vec<Command>,
}

impl SchedulerFsm {
    pub fn new(plan: &TilingPlan) -> Self {
        let n = plan.tasks.len();
        let mut accumulates = vec![0; n];
        for g in &plan.groups {
            for s in &g.tree {
                accumulates[s.accumulator] += 1;
            }
        }
        let slots = plan.slots_per_worker();
        Self {
            plan: plan.clone(),
            tasks: vec![
                TaskState {
                    state: WorkerState::Idle,
                    epoch: 0,
                    slot: None,
                    pending: None,
                    combines_done: 0,
                    writeback_issued: false,
                };
                n
            ],
            steps: plan
                .groups
                .iter()
                .map(|g| vec![StepState::default(); g.tree.len()])
                .collect(),
            slots: vec![vec![false; slots]; plan.workers],
            computing: vec![None; plan.workers],
            next_load: 0,
            accumulates,
            issued: Vec::new(),
        }
    }

    pub fn plan(&self) -> &TilingPlan {
        &self.plan
    }

    pub fn state(&self, task: usize) -> WorkerState {
        self.tasks[task].state
    }

    pub fn epoch(&self, task: usize) -> u32 {
        self.tasks[task].epoch
    }

    /// Every command issued so far, in issue order.
    pub fn issued(&self) -> &[Command] {
        &self.issued
    }

    pub fn finished(&self) -> bool {
        self.tasks.iter().all(|t| t.state == WorkerState::Terminated)
    }

    /// Combine steps not yet completed, over all groups.
    pub fn pending_combines(&self) -> usize {
        self.steps.iter().flatten().filter(|s| !s.done).count()
    }

    /// Records a polled flag. Flags whose epoch is not newer than the last
    /// seen are ignored; returns whether the flag was new.
    pub fn observe(&mut self, flag: WorkerFlag) -> Result<bool> {
        let t = flag.task;
        let cur = &self.tasks[t];
        if flag.epoch <= cur.epoch {
            return Ok(false);
        }
        if !cur.state.reaches(flag.state, flag.epoch - cur.epoch) {
            return Err(MatmulError::IllegalTransition {
                task: t,
                from: cur.state,
                to: flag.state,
            });
        }
        let task = &mut self.tasks[t];
        task.state = flag.state;
        task.epoch = flag.epoch;
        let Some((cmd, _)) = task.pending else {
            return Err(MatmulError::Protocol(format!(
                "task {t} changed to {:?} with no command outstanding",
                flag.state
            )));
        };
        if flag.state != cmd.completes_in() {
            return Ok(true);
        }
        task.pending = None;
        let worker = self.plan.worker_of(t);
        match cmd {
            Command::Multiply { .. } => self.computing[worker] = None,
            Command::Accumulate { .. } => {
                self.tasks[t].combines_done += 1;
                let (g, s) = self.step_of(t, self.tasks[t].combines_done - 1);
                self.steps[g][s].done = true;
            }
            Command::Terminate { .. } => {
                let slot = self.tasks[t].slot.take().expect("terminated task had a slot");
                self.slots[worker][slot] = false;
            }
            Command::Load { .. } | Command::Writeback { .. } => {}
        }
        Ok(true)
    }

    /// The `nth` combine step in which `task` accumulates.
    fn step_of(&self, task: usize, nth: usize) -> (usize, usize) {
        let g = self.plan.group_of(task);
        let s = self.plan.groups[g]
            .tree
            .iter()
            .enumerate()
            .filter(|(_, s)| s.accumulator == task)
            .nth(nth)
            .expect("combine step exists")
            .0;
        (g, s)
    }

    fn idle(&self, task: usize, state: WorkerState) -> bool {
        self.tasks[task].state == state && self.tasks[task].pending.is_none()
    }

    fn issue(&mut self, cmd: Command, out: &mut Vec<Command>) {
        let t = cmd.task();
        self.tasks[t].pending = Some((cmd, self.tasks[t].epoch));
        self.issued.push(cmd);
        out.push(cmd);
    }

    /// Commands made possible by the current snapshot, in (group, step)
    /// order followed by task loads in task order.
    pub fn commands(&mut self) -> Vec<Command> {
        let mut out = Vec::new();
        for g in 0..self.plan.groups.len() {
            let members = self.plan.groups[g].members.clone();
            for &m in &members {
                if self.idle(m, WorkerState::Loaded) {
                    self.issue(Command::Multiply { task: m }, &mut out);
                }
            }
            for s in 0..self.steps[g].len() {
                let step = self.plan.groups[g].tree[s];
                let (a, p) = (step.accumulator, step.partner);
                let st = self.steps[g][s];
                if !st.issued
                    && self.idle(a, WorkerState::MultDone)
                    && self.idle(p, WorkerState::MultDone)
                    && self.nth_combine(a) == Some(s)
                    && self.tasks[p].combines_done == self.accumulates[p]
                {
                    self.steps[g][s].issued = true;
                    let cmd = Command::Accumulate {
                        task: a,
                        partner: p,
                        partner_worker: self.plan.worker_of(p),
                        partner_slot: self.tasks[p].slot.expect("partner holds a slot"),
                    };
                    self.issue(cmd, &mut out);
                }
                if st.done && !st.partner_terminated && self.idle(p, WorkerState::MultDone) {
                    self.steps[g][s].partner_terminated = true;
                    self.issue(Command::Terminate { task: p }, &mut out);
                }
            }
            let root = members[0];
            if self.steps[g].iter().all(|s| s.done)
                && !self.tasks[root].writeback_issued
                && self.idle(root, WorkerState::MultDone)
            {
                self.tasks[root].writeback_issued = true;
                self.issue(Command::Writeback { task: root }, &mut out);
            }
            if self.idle(root, WorkerState::Done) {
                self.issue(Command::Terminate { task: root }, &mut out);
            }
        }
        while self.next_load < self.tasks.len() {
            let t = self.next_load;
            let w = self.plan.worker_of(t);
            let free = self.slots[w].iter().position(|&used| !used);
            let (None, Some(slot)) = (self.computing[w], free) else {
                break;
            };
            self.slots[w][slot] = true;
            self.computing[w] = Some(t);
            self.tasks[t].slot = Some(slot);
            self.next_load += 1;
            self.issue(Command::Load { task: t, slot }, &mut out);
        }
        out
    }

    /// Index within its group's tree of the next step `task` accumulates in.
    fn nth_combine(&self, task: usize) -> Option<usize> {
        let done = self.tasks[task].combines_done;
        (done < self.accumulates[task]).then(|| self.step_of(task, done).1)
    }

    /// Observes one flag and returns the commands it enables.
    pub fn update(&mut self, flag: WorkerFlag) -> Result<Vec<Command>> {
        self.observe(flag)?;
        Ok(self.commands())
    }
}
