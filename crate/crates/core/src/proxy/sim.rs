use crate::alphabet::ConcreteMessage;
use crate::sulsim::{ClusterConfig, ClusterHandle, ClusterObservation};

use super::{Proxy, ProxyError, SulEndpoint};

/// Proxy driving an in-process simulated cluster.
pub type SimProxy = Proxy<ClusterHandle>;

impl SulEndpoint for ClusterHandle {
    fn deliver(&mut self, msg: &ConcreteMessage) -> Result<(), ProxyError> {
        Ok(ClusterHandle::deliver(self, msg)?)
    }

    fn advance(&mut self, ticks: u64) -> Result<Vec<(u64, ConcreteMessage)>, ProxyError> {
        Ok(self.tick(ticks)?)
    }

    fn now(&self) -> u64 {
        ClusterHandle::now(self)
    }

    fn reset(&mut self) -> Result<(), ProxyError> {
        ClusterHandle::reset(self);
        Ok(())
    }

    fn leader_term(&mut self) -> Result<u64, ProxyError> {
        Ok(self.term())
    }

    fn observe(&mut self) -> Result<ClusterObservation, ProxyError> {
        Ok(ClusterHandle::observe(self))
    }
}

impl Proxy<ClusterHandle> {
    /// Spawns a cluster for `cfg` and opens a session as its dummy node.
    pub fn simulated(cfg: ClusterConfig) -> Result<Self, ProxyError> {
        let alphabet = cfg.alphabet_config();
        let hb = cfg.heartbeat_threshold;
        Proxy::new(ClusterHandle::spawn(cfg)?, alphabet, hb)
    }
}
