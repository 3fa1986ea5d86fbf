#include "quadrotor.hpp"

#include <cmath>

namespace dgpc {

Eigen::Vector3d WindModel::wind_at(double t) const {
  Eigen::Vector3d w = phase1;
  if (time_varying && t >= switch_time) {
    w += Eigen::Vector3d(1.5 * std::sin(0.8 * t), 1.0 * std::sin(1.3 * t + 1.0),
                         0.8 * std::sin(0.5 * t));
  }
  return w;
}

WindModel WindModel::paper_scenario() {
  WindModel w;
  w.phase1 = Eigen::Vector3d(1.0, 3.0, -2.0);
  w.switch_time = 10.0;
  w.time_varying = true;
  return w;
}

Eigen::Matrix3d rotation_body_to_inertial(const Eigen::Vector3d& euler) {
  const double cphi = std::cos(euler(0)), sphi = std::sin(euler(0));
  const double cth = std::cos(euler(1)), sth = std::sin(euler(1));
  const double cpsi = std::cos(euler(2)), spsi = std::sin(euler(2));
  Eigen::Matrix3d r;
  r << cpsi * cth, cpsi * sth * sphi - spsi * cphi, cpsi * sth * cphi + spsi * sphi,
       spsi * cth, spsi * sth * sphi + cpsi * cphi, spsi * sth * cphi - cpsi * sphi,
       -sth,       cth * sphi,                      cth * cphi;
  return r;
}

namespace {

struct Derivative {
  Eigen::Vector3d dp, dv, dzeta, domega;
};

Derivative dynamics(const QuadrotorState& s, double thrust,
                    const Eigen::Vector3d& torque, const Eigen::Vector3d& wind_v,
                    const QuadrotorParams& params) {
  const Eigen::Matrix3d r = rotation_body_to_inertial(s.euler);
  const Eigen::Vector3d rel_air = s.velocity - wind_v;
  const Eigen::Vector3d drag =
      -r * params.drag_diag.asDiagonal() * (r.transpose() * rel_air);
  const Eigen::Vector3d tau_d =
      params.torque_coupling * s.body_rates.cross(drag);

  Derivative d;
  d.dp = s.velocity;
  d.dv = params.gravity * Eigen::Vector3d::UnitZ() -
         (thrust / params.mass) * (r * Eigen::Vector3d::UnitZ()) +
         drag / params.mass;

  const double cphi = std::cos(s.euler(0)), sphi = std::sin(s.euler(0));
  const double cth = std::cos(s.euler(1)), sth = std::sin(s.euler(1));
  Eigen::Matrix3d m;
  m << cth, 0.0, -sth * cphi,
       0.0, 1.0, sphi,
       sth, 0.0, cth * cphi;
  d.dzeta = m.inverse() * s.body_rates;

  const Eigen::Vector3d jw = params.inertia_diag.cwiseProduct(s.body_rates);
  d.domega = (-s.body_rates.cross(jw) + torque + tau_d)
                 .cwiseQuotient(params.inertia_diag);
  return d;
}

QuadrotorState advance(const QuadrotorState& s, const Derivative& d, double dt) {
  QuadrotorState out;
  out.position = s.position + dt * d.dp;
  out.velocity = s.velocity + dt * d.dv;
  out.euler = s.euler + dt * d.dzeta;
  out.body_rates = s.body_rates + dt * d.domega;
  return out;
}

void check_attitude(const QuadrotorState& s) {
  if (std::abs(s.euler(0)) >= 1.5 || std::abs(s.euler(1)) >= 1.5 ||
      !s.euler.allFinite() || !s.velocity.allFinite()) {
    throw SimulationError("quadrotor: attitude approaching gimbal lock");
  }
}

}  // namespace

QuadrotorState rk4_step(const QuadrotorState& state, double thrust,
                        const Eigen::Vector3d& torque, const WindModel& wind,
                        double t, double dt, const QuadrotorParams& params) {
  if (thrust < 0.0) throw std::invalid_argument("rk4_step: thrust must be >= 0");
  const Eigen::Vector3d w0 = wind.wind_at(t);
  const Eigen::Vector3d w1 = wind.wind_at(t + 0.5 * dt);
  const Eigen::Vector3d w2 = wind.wind_at(t + dt);

  const Derivative k1 = dynamics(state, thrust, torque, w0, params);
  const Derivative k2 =
      dynamics(advance(state, k1, 0.5 * dt), thrust, torque, w1, params);
  const Derivative k3 =
      dynamics(advance(state, k2, 0.5 * dt), thrust, torque, w1, params);
  const Derivative k4 =
      dynamics(advance(state, k3, dt), thrust, torque, w2, params);

  QuadrotorState out;
  out.position = state.position + dt / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
  out.velocity = state.velocity + dt / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  out.euler = state.euler + dt / 6.0 * (k1.dzeta + 2.0 * k2.dzeta + 2.0 * k3.dzeta + k4.dzeta);
  out.body_rates = state.body_rates +
                   dt / 6.0 * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega);
  check_attitude(out);
  return out;
}

QuadrotorState step_nonlinear(const QuadrotorState& state, double thrust,
                              const Eigen::Vector3d& torque, const WindModel& wind,
                              double t, const QuadrotorParams& params) {
  const double dt = params.time_step / params.substeps;
  QuadrotorState s = state;
  for (int i = 0; i < params.substeps; ++i) {
    s = rk4_step(s, thrust, torque, wind, t + i * dt, dt, params);
  }
  return s;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> linearized_model(
    const QuadrotorParams& params) {
  const double ts = params.time_step;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(6, 6);
  a.topRightCorner(3, 3) = ts * Eigen::Matrix3d::Identity();

  Eigen::Matrix3d accel_map = Eigen::Matrix3d::Zero();
  accel_map(0, 1) = -params.gravity;       // theta_cmd -> x acceleration
  accel_map(1, 0) = params.gravity;        // phi_cmd  -> y acceleration
  accel_map(2, 2) = -1.0 / params.mass;    // thrust deviation -> z acceleration

  Eigen::MatrixXd b(6, 3);
  b.topRows(3) = 0.5 * ts * ts * accel_map;
  b.bottomRows(3) = ts * accel_map;
  return {a, b};
}

std::pair<double, Eigen::Vector3d> pd_attitude_loop(
    const QuadrotorState& state, const Eigen::Vector3d& attitude_cmd,
    double thrust_cmd, const PdGains& gains) {
  if ((gains.kp.array() <= 0.0).any() || (gains.kd.array() <= 0.0).any()) {
    throw std::invalid_argument("pd_attitude_loop: gains must be positive");
  }
  const Eigen::Vector3d tau =
      -gains.kp.cwiseProduct(state.euler - attitude_cmd) -
      gains.kd.cwiseProduct(state.body_rates);
  return {thrust_cmd, tau};
}

TrajectoryPoint collection_reference(double t) {
  TrajectoryPoint p;
  p.position = Eigen::Vector3d(
      1.5 * std::sin(t) + 1.5 * std::sin(0.33 * t),
      std::sin(1.1 * t + M_PI / 2) + std::sin(0.11 * t),
      std::sin(0.33 * t + M_PI / 2) + std::sin(0.76 * t) + 3.0);
  p.velocity = Eigen::Vector3d(
      1.5 * std::cos(t) + 0.495 * std::cos(0.33 * t),
      1.1 * std::cos(1.1 * t + M_PI / 2) + 0.11 * std::cos(0.11 * t),
      0.33 * std::cos(0.33 * t + M_PI / 2) + 0.76 * std::cos(0.76 * t));
  p.acceleration = Eigen::Vector3d(
      -1.5 * std::sin(t) - 0.16335 * std::sin(0.33 * t),
      -1.21 * std::sin(1.1 * t + M_PI / 2) - 0.0121 * std::sin(0.11 * t),
      -0.1089 * std::sin(0.33 * t + M_PI / 2) - 0.5776 * std::sin(0.76 * t));
  return p;
}

TrajectoryPoint helix_reference(double t, double total_time) {
  TrajectoryPoint p;
  p.position = Eigen::Vector3d(2.0 * std::sin(t), 2.0 * std::cos(t),
                               2.0 * t / total_time + 2.0);
  p.velocity = Eigen::Vector3d(2.0 * std::cos(t), -2.0 * std::sin(t),
                               2.0 / total_time);
  p.acceleration = Eigen::Vector3d(-2.0 * std::sin(t), -2.0 * std::cos(t), 0.0);
  return p;
}

ReferenceProvider reference_provider_for(const TrajectoryFn& traj,
                                         const QuadrotorParams& params) {
  const double g = params.gravity;
  const double m = params.mass;
  return [traj, g, m](double t, Eigen::VectorXd& x_ref, Eigen::VectorXd& u_ref) {
    const TrajectoryPoint p = traj(t);
    x_ref.resize(6);
    x_ref << p.position, p.velocity;
    u_ref.resize(3);
    u_ref << p.acceleration(1) / g, -p.acceleration(0) / g,
        -m * p.acceleration(2);
  };
}

QuadrotorPlant::QuadrotorPlant(const QuadrotorState& initial,
                               const QuadrotorParams& params,
                               const WindModel& wind, const PdGains& gains,
                               const Eigen::VectorXd& noise_std, uint64_t seed)
    : state_(initial),
      params_(params),
      wind_(wind),
      gains_(gains),
      noise_std_(noise_std),
      rng_(Rng(seed).split("plant_noise")),
      last_noise_(Eigen::VectorXd::Zero(6)) {
  if (noise_std_.size() != 6) {
    throw std::invalid_argument("QuadrotorPlant: noise_std must have 6 entries");
  }
}

Eigen::VectorXd QuadrotorPlant::state() const {
  Eigen::VectorXd x(6);
  x << state_.position, state_.velocity;
  return x;
}

double QuadrotorPlant::applied_thrust(const Eigen::VectorXd& u) const {
  const double hover = params_.hover_thrust();
  return std::clamp(hover + u(2), 0.0, 2.0 * hover);
}

Eigen::VectorXd QuadrotorPlant::gp_input(const Eigen::VectorXd& u) const {
  Eigen::VectorXd z(7);
  z << state_.euler, state_.velocity, applied_thrust(u);
  return z;
}

void QuadrotorPlant::step(const Eigen::VectorXd& u) {
  const double thrust = applied_thrust(u);
  const Eigen::Vector3d attitude_cmd(
      std::clamp(u(0), -0.6, 0.6), std::clamp(u(1), -0.6, 0.6), 0.0);
  const double dt = params_.time_step / params_.substeps;
  for (int i = 0; i < params_.substeps; ++i) {
    auto [t_cmd, tau] = pd_attitude_loop(state_, attitude_cmd, thrust, gains_);
    tau = tau.cwiseMax(-0.5).cwiseMin(0.5);
    state_ = rk4_step(state_, t_cmd, tau, wind_, time_ + i * dt, dt, params_);
  }
  last_noise_.resize(6);
  for (int i = 0; i < 6; ++i) last_noise_(i) = noise_std_(i) * rng_.normal();
  state_.position += last_noise_.head<3>();
  state_.velocity += last_noise_.tail<3>();
  time_ += params_.time_step;
}

MpcProblem default_quadrotor_mpc(const QuadrotorParams& params) {
  MpcProblem prob;
  auto [a, b] = linearized_model(params);
  prob.a = a;
  prob.b = b;
  Eigen::VectorXd qdiag(6);
  qdiag << 1.0, 1.0, 20.0, 1.0, 1.0, 20.0;
  prob.q = qdiag.asDiagonal();
  prob.qf = prob.q;
  prob.r = Eigen::MatrixXd::Identity(3, 3);
  prob.horizon = 5;
  prob.gamma = 0.95;

  // Position box [-4,4] x [-4,4] x [0,6].
  prob.cx = Eigen::MatrixXd::Zero(6, 6);
  prob.cx_bound = Eigen::VectorXd(6);
  prob.cx(0, 0) = 1.0;  prob.cx_bound(0) = 4.0;
  prob.cx(1, 0) = -1.0; prob.cx_bound(1) = 4.0;
  prob.cx(2, 1) = 1.0;  prob.cx_bound(2) = 4.0;
  prob.cx(3, 1) = -1.0; prob.cx_bound(3) = 4.0;
  prob.cx(4, 2) = 1.0;  prob.cx_bound(4) = 6.0;
  prob.cx(5, 2) = -1.0; prob.cx_bound(5) = 0.0;

  // Attitude commands within +/-0.5 rad, thrust within [0, 2 m g].
  prob.cu = Eigen::MatrixXd::Zero(6, 3);
  prob.cu_bound = Eigen::VectorXd(6);
  prob.cu(0, 0) = 1.0;  prob.cu_bound(0) = 0.5;
  prob.cu(1, 0) = -1.0; prob.cu_bound(1) = 0.5;
  prob.cu(2, 1) = 1.0;  prob.cu_bound(2) = 0.5;
  prob.cu(3, 1) = -1.0; prob.cu_bound(3) = 0.5;
  prob.cu(4, 2) = 1.0;  prob.cu_bound(4) = params.hover_thrust();
  prob.cu(5, 2) = -1.0; prob.cu_bound(5) = params.hover_thrust();

  prob.noise_cov = Eigen::MatrixXd::Zero(6, 6);
  const Eigen::VectorXd noise = default_process_noise_std();
  prob.noise_cov.diagonal() = noise.array().square();

  const double hover = params.hover_thrust();
  prob.gp_input_map = [hover](const Eigen::VectorXd& mu,
                              const Eigen::MatrixXd& sigma,
                              const Eigen::VectorXd& u) {
    GaussianInput gi;
    gi.mean.resize(7);
    gi.mean << u(0), u(1), 0.0, mu.tail(3), hover + u(2);
    gi.covariance = Eigen::MatrixXd::Zero(7, 7);
    gi.covariance.block<3, 3>(3, 3) = sigma.bottomRightCorner(3, 3);
    return gi;
  };
  return prob;
}

QuadrotorState initial_state_on(const TrajectoryFn& traj,
                                const QuadrotorParams& params) {
  const TrajectoryPoint p = traj(0.0);
  QuadrotorState s;
  s.position = p.position;
  s.velocity = p.velocity;
  s.euler = Eigen::Vector3d(p.acceleration(1) / params.gravity,
                            -p.acceleration(0) / params.gravity, 0.0);
  s.body_rates.setZero();
  return s;
}

Eigen::VectorXd default_process_noise_std() {
  Eigen::VectorXd std(6);
  std << 1e-4, 1e-4, 1e-4, 1e-2, 1e-2, 1e-2;
  return std;
}

Dataset collect_training_data(const WindModel& wind, const CollectOptions& opts) {
  if (!(opts.duration > 0.0) || !(opts.rate > 0.0)) {
    throw std::invalid_argument("collect_training_data: duration and rate > 0");
  }
  QuadrotorParams params = opts.params;
  params.time_step = 1.0 / opts.rate;

  const TrajectoryFn traj = [](double t) { return collection_reference(t); };
  const Eigen::VectorXd noise_std =
      opts.noise_std.size() == 6 ? opts.noise_std : default_process_noise_std();
  QuadrotorPlant plant(initial_state_on(traj, params), params, wind, opts.gains,
                       noise_std, opts.seed);

  MpcProblem prob = default_quadrotor_mpc(params);

  // Nominal linear MPC: no GP model.
  DualGpModel empty;
  empty.input_dim = 7;
  empty.channels.resize(6);

  const int steps = static_cast<int>(std::llround(opts.duration * opts.rate));
  const MissionResult mission = run_closed_loop(
      plant, empty, prob, reference_provider_for(traj, params), steps);
  if (mission.aborted) {
    throw SimulationError("collect_training_data: " + mission.abort_reason);
  }
  return mission.log;
}

}  // namespace dgpc
