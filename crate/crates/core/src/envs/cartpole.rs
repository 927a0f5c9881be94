use rand::Rng;

use crate::Scalar;

/// Cart position (m), cart velocity (m/s), pole angle (rad), pole angular velocity (rad/s),
/// and the number of steps taken in the current episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartPoleState<T> {
    pub x: T,
    pub x_dot: T,
    pub theta: T,
    pub theta_dot: T,
    pub steps: u32,
}

impl<T: Scalar> CartPoleState<T> {
    pub fn observation(&self) -> Vec<T> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }
}

/// Outcome of one simulator step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartStep<T> {
    pub state: CartPoleState<T>,
    pub reward: T,
    /// The pole fell or the cart left the track.
    pub terminated: bool,
    /// The horizon was reached without failure.
    pub truncated: bool,
}

/// Cart-pole with two actions (push left, push right) and explicit Euler integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartPole<T> {
    pub gravity: T,
    pub cart_mass: T,
    pub pole_mass: T,
    /// Half the pole length.
    pub half_length: T,
    pub force: T,
    pub dt: T,
    pub angle_limit: T,
    pub position_limit: T,
    pub horizon: u32,
}

impl<T: Scalar> Default for CartPole<T> {
    fn default() -> Self {
        Self {
            gravity: T::lit(9.8),
            cart_mass: T::lit(1.0),
            pole_mass: T::lit(0.1),
            half_length: T::lit(0.5),
            force: T::lit(10.0),
            dt: T::lit(0.02),
            angle_limit: T::lit(12.0 * std::f64::consts::PI / 180.0),
            position_limit: T::lit(2.4),
            horizon: 500,
        }
    }
}

impl<T: Scalar> CartPole<T> {
    pub const N_ACTIONS: usize = 2;
    pub const OBS_DIM: usize = 4;

    /// Every component uniform in `±0.05`.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> CartPoleState<T> {
        let mut u = || T::lit(rng.gen_range(-0.05..0.05));
        CartPoleState {
            x: u(),
            x_dot: u(),
            theta: u(),
            theta_dot: u(),
            steps: 0,
        }
    }

    /// Pure successor function; action 0 pushes left, anything else pushes right.
    pub fn dynamics(&self, s: &CartPoleState<T>, action: usize) -> CartPoleState<T> {
        let force = if action == 0 { -self.force } else { self.force };
        let total = self.cart_mass + self.pole_mass;
        let pml = self.pole_mass * self.half_length;
        let (sin, cos) = (s.theta.sin(), s.theta.cos());
        let temp = (force + pml * s.theta_dot * s.theta_dot * sin) / total;
        let theta_acc = (self.gravity * sin - cos * temp)
            / (self.half_length * (T::lit(4.0 / 3.0) - self.pole_mass * cos * cos / total));
        let x_acc = temp - pml * theta_acc * cos / total;
        CartPoleState {
            x: s.x + self.dt * s.x_dot,
            x_dot: s.x_dot + self.dt * x_acc,
            theta: s.theta + self.dt * s.theta_dot,
            theta_dot: s.theta_dot + self.dt * theta_acc,
            steps: s.steps + 1,
        }
    }

    pub fn failed(&self, s: &CartPoleState<T>) -> bool {
        s.x.abs() > self.position_limit || s.theta.abs() > self.angle_limit
    }

    /// Reward +1 on every step, including the failing one.
    pub fn step(&self, s: &CartPoleState<T>, action: usize) -> CartStep<T> {
        let next = self.dynamics(s, action);
        let terminated = self.failed(&next);
        CartStep {
            state: next,
            reward: T::one(),
            terminated,
            truncated: !terminated && next.steps >= self.horizon,
        }
    }

    /// Undiscounted return of one episode under `policy`.
    pub fn rollout<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        mut policy: impl FnMut(&CartPoleState<T>, &mut R) -> usize,
    ) -> T {
        let mut s = self.reset(rng);
        let mut ret = T::zero();
        loop {
            let a = policy(&s, rng);
            let out = self.step(&s, a);
            ret += out.reward;
            if out.terminated || out.truncated {
                return ret;
            }
            s = out.state;
        }
    }
}
