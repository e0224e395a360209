//! Active clusters a new mention is compared against, and the history
//! of clusters that have gone idle.

/// One cluster of mention ordinals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterState {
    /// Creation order, stable for the life of the workspace.
    pub id: usize,
    /// Mention ordinals in arrival order.
    pub members: Vec<usize>,
    /// Step at which the last member arrived.
    pub last_updated: usize,
}

/// Where a candidate goes: an active cluster (by position) or a new one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Cluster(usize),
    New,
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub active: Vec<ClusterState>,
    pub history: Vec<ClusterState>,
    pub step: usize,
    /// Clusters idle for more than this many steps leave the workspace.
    pub eviction: usize,
    next_id: usize,
}

impl Workspace {
    pub fn new(eviction: usize) -> Self {
        Workspace { active: Vec::new(), history: Vec::new(), step: 0, eviction, next_id: 0 }
    }

    /// Adds `mention` according to `choice`, advances the step counter and
    /// retires idle clusters. Returns the id of the receiving cluster.
    pub fn place(&mut self, mention: usize, choice: Choice) -> usize {
        let id = match choice {
            Choice::Cluster(k) => {
                let c = &mut self.active[k];
                c.members.push(mention);
                c.last_updated = self.step;
                c.id
            }
            Choice::New => {
                let id = self.next_id;
                self.next_id += 1;
                self.active.push(ClusterState { id, members: vec![mention], last_updated: self.step });
                id
            }
        };
        self.step += 1;
        self.evict();
        id
    }

    /// The id the next [`Choice::New`] will receive.
    pub fn next_id(&self) -> usize {
        self.next_id
    }

    fn evict(&mut self) {
        let (step, limit) = (self.step, self.eviction);
        let (keep, idle): (Vec<_>, Vec<_>) =
            self.active.drain(..).partition(|c| step - c.last_updated <= limit);
        self.active = keep;
        self.history.extend(idle);
    }

    /// Position in `active` of the cluster holding `mention`.
    pub fn active_position(&self, mention: usize) -> Option<usize> {
        self.active.iter().position(|c| c.members.contains(&mention))
    }

    /// Every cluster, active and retired, ordered by creation.
    pub fn clusters(&self) -> Vec<&ClusterState> {
        let mut all: Vec<&ClusterState> = self.active.iter().chain(&self.history).collect();
        all.sort_by_key(|c| c.id);
        all
    }
}
