use super::Instance;

/// Per-(server, content) request lookups used by column costing and pricing.
#[derive(Clone, Debug)]
pub struct RequestIndex {
    contents: usize,
    /// Single-choice requests of each pair, by request id.
    scr: Vec<Vec<usize>>,
    /// Multiple-choice requests each pair may serve.
    mcr: Vec<Vec<usize>>,
    mcr_ids: Vec<usize>,
}

impl RequestIndex {
    pub fn new(inst: &Instance) -> Self {
        let pairs = inst.num_servers() * inst.num_contents();
        let mut scr = vec![Vec::new(); pairs];
        let mut mcr = vec![Vec::new(); pairs];
        let mut mcr_ids = Vec::new();
        for (r, req) in inst.requests.iter().enumerate() {
            if req.is_mcr() {
                mcr_ids.push(r);
                for &h in &req.candidates {
                    mcr[inst.pair(h, req.content)].push(r);
                }
            } else {
                scr[inst.pair(req.candidates[0], req.content)].push(r);
            }
        }
        RequestIndex { contents: inst.num_contents(), scr, mcr, mcr_ids }
    }

    fn pair(&self, h: usize, i: usize) -> usize {
        h * self.contents + i
    }

    /// `R^s_{hi}`.
    pub fn scr(&self, h: usize, i: usize) -> &[usize] {
        &self.scr[self.pair(h, i)]
    }

    /// Multiple-choice requests for content `i` that list server `h`.
    pub fn mcr(&self, h: usize, i: usize) -> &[usize] {
        &self.mcr[self.pair(h, i)]
    }

    /// All multiple-choice request ids, ascending.
    pub fn mcr_ids(&self) -> &[usize] {
        &self.mcr_ids
    }

    /// Single-choice requests of `(h, i)` whose deadline is slot `t`.
    pub fn r_xi<'a>(&'a self, inst: &'a Instance, h: usize, i: usize, t: usize) -> impl Iterator<Item = usize> + 'a {
        self.scr(h, i).iter().copied().filter(move |&r| inst.requests[r].deadline == t)
    }

    /// Single-choice requests of `(h, i)` with deadline `t` and origin `t - tau`.
    pub fn r_psi<'a>(&'a self, inst: &'a Instance, h: usize, i: usize, t: usize, tau: usize) -> impl Iterator<Item = usize> + 'a {
        self.scr(h, i).iter().copied().filter(move |&r| {
            let q = &inst.requests[r];
            q.deadline == t && q.origin + tau == t
        })
    }

    /// Multiple-choice requests of `(h, i)` with origin `o` and deadline at or after `d`.
    pub fn r_varsigma<'a>(&'a self, inst: &'a Instance, h: usize, i: usize, o: usize, d: usize) -> impl Iterator<Item = usize> + 'a {
        self.mcr(h, i).iter().copied().filter(move |&r| {
            let q = &inst.requests[r];
            q.origin == o && q.deadline >= d
        })
    }
}
