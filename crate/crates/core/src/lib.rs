//! Two-user, multi-carrier energy-efficiency game.
//!
//! Two transmitters share `K` flat-fading carriers. Each picks a power on
//! every carrier and is paid in bits per Joule:
//!
//! ```text
//! u_n = R_n Σ_k f(γ_n^k) / Σ_k p_n^k,    γ_n^k = g_n^k p_n^k / (σ² + g_m^k p_m^k)
//! ```
//!
//! with `f` a sigmoidal packet-success function. The crate provides:
//!
//! * [`efficiency`]: the efficiency functions and the critical SINRs `γ*`, `β*`;
//! * [`channel`]: fixture and correlated-Rayleigh channel gains;
//! * [`game`]: SINR and utility evaluation plus a brute-force best response;
//! * [`equilibria`]: closed-form Stackelberg, Nash and social-optimum solvers;
//! * [`analysis`]: probability, spectral-efficiency and welfare bounds;
//! * [`sim`]: seeded Monte Carlo sweeps with CSV output;
//! * [`verify`]: an oracle-based property suite used by the `verify` command.
//!
//! ```
//! use carrier_game::{ChannelMatrix, EfficiencyModel, GameInstance, equilibria};
//!
//! let channel = ChannelMatrix::new(vec![3.0, 1.0], vec![1.0, 2.0]).unwrap();
//! let inst = GameInstance::new(channel, 1.0, [1.0, 1.0], EfficiencyModel::exponential(100).unwrap()).unwrap();
//! let out = equilibria::stackelberg_solve(&inst).unwrap();
//! assert!(out.orthogonalized);
//! assert_eq!(out.users[0].carrier, Some(0));
//! ```

pub mod analysis;
pub mod channel;
pub mod cli;
pub mod config;
pub mod efficiency;
pub mod equilibria;
pub mod error;
pub mod format;
pub mod game;
pub mod sim;
pub mod verify;

pub use channel::{best_two_carriers, sample_channel, ChannelMatrix, CorrelationSpec};
pub use efficiency::{EfficiencyKind, EfficiencyModel};
pub use equilibria::{EquilibriumOutcome, LeaderCandidates, OutcomeKind, UserOutcome};
pub use error::{Error, Result};
pub use game::{GameInstance, PowerAllocation};

/// One of the two players. In the Stackelberg game user one leads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum User {
    One,
    Two,
}

impl User {
    pub const BOTH: [User; 2] = [User::One, User::Two];

    pub fn index(self) -> usize {
        match self {
            User::One => 0,
            User::Two => 1,
        }
    }

    pub fn other(self) -> User {
        match self {
            User::One => User::Two,
            User::Two => User::One,
        }
    }
}

// Compile the guide's code listings as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/efficiency.md")]
    mod efficiency {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/equilibria.md")]
    mod equilibria {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
