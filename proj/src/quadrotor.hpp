// Nonlinear quadrotor rigid-body simulator with a heading-dependent drag
// disturbance, inner-loop PD attitude control and the linearized
// translational model used by the outer-loop MPC.
#pragma once

#include "mpc.hpp"
#include "rng.hpp"

namespace dgpc {

class SimulationError : public std::runtime_error {
 public:
  explicit SimulationError(const std::string& what) : std::runtime_error(what) {}
};

struct QuadrotorState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d euler = Eigen::Vector3d::Zero();  // (phi, theta, psi)
  Eigen::Vector3d body_rates = Eigen::Vector3d::Zero();
};

struct QuadrotorParams {
  double mass = 1.9;                                   // kg
  Eigen::Vector3d inertia_diag{5.9e-3, 5.9e-3, 10.7e-3};  // kg m^2
  double gravity = 9.81;                               // m/s^2
  double time_step = 0.05;                             // outer-loop period, s
  int substeps = 10;                                   // RK4 substeps per step
  Eigen::Vector3d drag_diag{0.3, 0.3, 0.15};           // kg/s, body frame
  double torque_coupling = 0.01;                       // tau_d = c * w x F_d

  double hover_thrust() const { return mass * gravity; }
};

struct WindModel {
  Eigen::Vector3d phase1 = Eigen::Vector3d::Zero();
  double switch_time = std::numeric_limits<double>::infinity();
  bool time_varying = false;

  Eigen::Vector3d wind_at(double t) const;

  static WindModel none() { return {}; }
  static WindModel constant(const Eigen::Vector3d& v) {
    WindModel w;
    w.phase1 = v;
    return w;
  }
  // Constant (1, 3, -2) m/s switching to a bounded multi-sine at 10 s.
  static WindModel paper_scenario();
};

struct PdGains {
  Eigen::Vector3d kp{8.0, 8.0, 4.0};
  Eigen::Vector3d kd{1.5, 1.5, 0.8};
};

Eigen::Matrix3d rotation_body_to_inertial(const Eigen::Vector3d& euler);

// One RK4 step of the rigid-body dynamics with fixed thrust and torque.
QuadrotorState rk4_step(const QuadrotorState& state, double thrust,
                        const Eigen::Vector3d& torque, const WindModel& wind,
                        double t, double dt, const QuadrotorParams& params);

// Integrates one outer-loop period (params.time_step) with zero-order-hold
// inputs and params.substeps internal RK4 steps.
QuadrotorState step_nonlinear(const QuadrotorState& state, double thrust,
                              const Eigen::Vector3d& torque, const WindModel& wind,
                              double t, const QuadrotorParams& params);

// Discrete-time (A, B) of the 6-state translational subsystem (p, v) about
// hover, input u = (phi_cmd, theta_cmd, thrust - m g), exact ZOH at the
// outer-loop period.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> linearized_model(
    const QuadrotorParams& params);

// tau = -Kp (zeta - zeta_des) - Kd w per axis; thrust passes through.
std::pair<double, Eigen::Vector3d> pd_attitude_loop(
    const QuadrotorState& state, const Eigen::Vector3d& attitude_cmd,
    double thrust_cmd, const PdGains& gains);

struct TrajectoryPoint {
  Eigen::Vector3d position, velocity, acceleration;
};

// Pseudo-random data-collection trajectory.
TrajectoryPoint collection_reference(double t);
// Helix tracking mission, climb spread over total_time.
TrajectoryPoint helix_reference(double t, double total_time);

using TrajectoryFn = std::function<TrajectoryPoint(double)>;

// Maps a trajectory to MPC references: x_ref = (p, v) and the feedforward
// input that realizes the reference acceleration.
ReferenceProvider reference_provider_for(const TrajectoryFn& traj,
                                         const QuadrotorParams& params);

// Full plant behind the 6-state translational MPC view. The inner PD loop
// runs at the physics substep rate; actuators saturate at [0, 2 m g] thrust
// and +/-0.5 Nm torque per axis.
class QuadrotorPlant : public ClosedLoopPlant {
 public:
  QuadrotorPlant(const QuadrotorState& initial, const QuadrotorParams& params,
                 const WindModel& wind, const PdGains& gains,
                 const Eigen::VectorXd& noise_std, uint64_t seed);

  Eigen::VectorXd state() const override;
  Eigen::VectorXd gp_input(const Eigen::VectorXd& u) const override;
  void step(const Eigen::VectorXd& u) override;
  double time() const override { return time_; }
  double step_size() const override { return params_.time_step; }
  Eigen::VectorXd last_noise() const override { return last_noise_; }

  const QuadrotorState& full_state() const { return state_; }
  double applied_thrust(const Eigen::VectorXd& u) const;

 private:
  QuadrotorState state_;
  QuadrotorParams params_;
  WindModel wind_;
  PdGains gains_;
  Eigen::VectorXd noise_std_;
  Rng rng_;
  double time_ = 0.0;
  Eigen::VectorXd last_noise_;
};

// Default translational MPC problem for the quadrotor study: paper weights,
// position box [-4,4]x[-4,4]x[0,6] and actuator-derived input box.
MpcProblem default_quadrotor_mpc(const QuadrotorParams& params);

// Initial state consistent with a trajectory start.
QuadrotorState initial_state_on(const TrajectoryFn& traj,
                                const QuadrotorParams& params);

struct CollectOptions {
  double duration = 50.0;
  double rate = 20.0;
  uint64_t seed = 0;
  Eigen::VectorXd noise_std;  // per-channel process noise, empty = default
  QuadrotorParams params;
  PdGains gains;
};

// Flies the pseudo-random reference under nominal linear MPC and returns the
// logged (z, y) pairs, z = (euler, velocity, thrust).
Dataset collect_training_data(const WindModel& wind, const CollectOptions& opts);

// Default per-channel process noise (position rows then velocity rows).
Eigen::VectorXd default_process_noise_std();

}  // namespace dgpc
