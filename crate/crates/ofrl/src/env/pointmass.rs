//! 2-D point mass: a double integrator with drag inside walled `[-1,1]^2`,
//! rewarded for closing the distance to a fixed goal with a small action
//! cost. Dynamics are deterministic given `(s, a)`; only the start position
//! is randomized. Episodes end at the horizon, never earlier, so a constant
//! reward bonus cannot change which policy is optimal.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Transition;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMassSpec {
    pub dt: f64,
    pub drag: f64,
    pub accel_scale: f64,
    pub max_speed: f64,
    pub goal: [f64; 2],
    pub start: [f64; 2],
    pub start_noise: f64,
    pub action_cost: f64,
    pub horizon: usize,
    pub discount: f64,
}

impl Default for PointMassSpec {
    fn default() -> Self {
        PointMassSpec {
            dt: 0.1,
            drag: 0.5,
            accel_scale: 1.0,
            max_speed: 1.0,
            goal: [0.7, 0.7],
            start: [-0.7, -0.7],
            start_noise: 0.05,
            action_cost: 0.05,
            horizon: 200,
            discount: 0.99,
        }
    }
}

/// Position and velocity, stored flat as `[px, py, vx, vy]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMassState(pub [f64; 4]);

impl PointMassState {
    pub fn as_vec(&self) -> Vec<f64> {
        self.0.to_vec()
    }
}

impl PointMassSpec {
    pub fn reset(&self, rng: &mut ChaCha8Rng) -> PointMassState {
        let nx = rng.random_range(-self.start_noise..self.start_noise);
        let ny = rng.random_range(-self.start_noise..self.start_noise);
        PointMassState([self.start[0] + nx, self.start[1] + ny, 0.0, 0.0])
    }

    /// One step of the clipped double integrator. Wall contact zeroes the
    /// velocity component pointing into the wall.
    pub fn step(&self, s: PointMassState, action: &[f64]) -> (PointMassState, f64) {
        let [px, py, vx, vy] = s.0;
        let ax = action[0].clamp(-1.0, 1.0) * self.accel_scale;
        let ay = action[1].clamp(-1.0, 1.0) * self.accel_scale;
        let mut nvx = (vx + self.dt * (ax - self.drag * vx)).clamp(-self.max_speed, self.max_speed);
        let mut nvy = (vy + self.dt * (ay - self.drag * vy)).clamp(-self.max_speed, self.max_speed);
        let mut npx = px + self.dt * nvx;
        let mut npy = py + self.dt * nvy;
        if npx.abs() > 1.0 {
            npx = npx.clamp(-1.0, 1.0);
            nvx = 0.0;
        }
        if npy.abs() > 1.0 {
            npy = npy.clamp(-1.0, 1.0);
            nvy = 0.0;
        }
        let dist = ((npx - self.goal[0]).powi(2) + (npy - self.goal[1]).powi(2)).sqrt();
        let cost = self.action_cost * (action[0].powi(2) + action[1].powi(2));
        let reward = -dist - cost;
        (PointMassState([npx, npy, nvx, nvy]), reward)
    }

    /// Roll one full episode, returning the transitions and the undiscounted
    /// return. `act` receives the flat state.
    pub fn rollout(
        &self,
        rng: &mut ChaCha8Rng,
        mut act: impl FnMut(&[f64], &mut ChaCha8Rng) -> Vec<f64>,
    ) -> (Vec<Transition>, f64) {
        let mut s = self.reset(rng);
        let mut transitions = Vec::with_capacity(self.horizon);
        let mut ret = 0.0;
        for t in 0..self.horizon {
            let a = act(&s.0, rng);
            let (ns, r) = self.step(s, &a);
            ret += r;
            transitions.push(Transition {
                state: s.as_vec(),
                action: a,
                reward: r,
                next_state: ns.as_vec(),
                done: t + 1 == self.horizon,
            });
            s = ns;
        }
        (transitions, ret)
    }

    /// Return of one episode without recording transitions.
    pub fn episode_return(
        &self,
        rng: &mut ChaCha8Rng,
        mut act: impl FnMut(&[f64], &mut ChaCha8Rng) -> Vec<f64>,
    ) -> f64 {
        let mut s = self.reset(rng);
        let mut ret = 0.0;
        for _ in 0..self.horizon {
            let a = act(&s.0, rng);
            let (ns, r) = self.step(s, &a);
            ret += r;
            s = ns;
        }
        ret
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn dynamics_deterministic() {
        let spec = PointMassSpec::default();
        let s = PointMassState([0.1, -0.2, 0.3, 0.0]);
        let a = [0.5, -0.5];
        assert_eq!(spec.step(s, &a), spec.step(s, &a));
    }

    #[test]
    fn states_stay_in_walls() {
        let spec = PointMassSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (transitions, _) = spec.rollout(&mut rng, |_, rng| {
            vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
        });
        for t in &transitions {
            assert!(t.next_state[0].abs() <= 1.0 && t.next_state[1].abs() <= 1.0);
            assert!(t.reward.is_finite());
        }
        assert_eq!(transitions.len(), spec.horizon);
        // terminal flag only at the horizon
        for (i, t) in transitions.iter().enumerate() {
            assert_eq!(t.done, i + 1 == spec.horizon);
        }
    }

    #[test]
    fn reward_bounded_below() {
        // worst case: opposite corner at max action cost
        let spec = PointMassSpec::default();
        let worst = -(8.0f64).sqrt() - spec.action_cost * 2.0;
        let s = PointMassState([-1.0, -1.0, 0.0, 0.0]);
        let (_, r) = spec.step(s, &[1.0, 1.0]);
        assert!(r >= worst);
    }

    #[test]
    fn straight_line_controller_beats_random() {
        let spec = PointMassSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let controller = |s: &[f64], _: &mut ChaCha8Rng| {
            // proportional-derivative pull toward the goal
            vec![
                (3.0 * (0.7 - s[0]) - 1.5 * s[2]).clamp(-1.0, 1.0),
                (3.0 * (0.7 - s[1]) - 1.5 * s[3]).clamp(-1.0, 1.0),
            ]
        };
        let good = spec.episode_return(&mut rng, controller);
        let rand_ret = spec.episode_return(&mut rng, |_, rng| {
            vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
        });
        assert!(good > rand_ret + 50.0, "good {good} vs random {rand_ret}");
    }
}
