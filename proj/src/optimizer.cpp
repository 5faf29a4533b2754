#include <Eigen/SparseCholesky>
#include <cmath>

#include "sgraphs/factor_graph.hpp"

namespace sgraphs {

namespace {

double huber_cost(double chi2, double delta) {
  const double d2 = delta * delta;
  if (chi2 <= d2) return chi2;
  return 2.0 * delta * std::sqrt(chi2) - d2;
}

double huber_weight(double chi2, double delta) {
  const double d2 = delta * delta;
  if (chi2 <= d2) return 1.0;
  return delta / std::sqrt(chi2);
}

struct StateIndex {
  std::map<VariableId, int> offset;
  std::vector<VariableId> order;
  int dim = 0;
};

StateIndex build_index(const FactorGraph& g) {
  StateIndex idx;
  for (const auto& [id, v] : g.variables()) {
    idx.offset[id] = idx.dim;
    idx.order.push_back(id);
    idx.dim += variable_local_dim(v);
  }
  return idx;
}

}  // namespace

double FactorGraph::total_cost(const OptimizerConfig& config) const {
  double cost = 0.0;
  for (const auto& [fid, f] : factors_) {
    const FactorBlocks b = evaluate_factor(fid);
    const double chi2 = b.residual.dot(b.information * b.residual);
    cost += huber_cost(chi2, config.huber_delta);
  }
  return cost;
}

OptReport FactorGraph::optimize(const OptimizerConfig& config) {
  // Relative pose factors alone leave the keyframe gauge free.
  if (variable_count(VarKind::Keyframe) > 0) {
    bool anchored = false;
    for (const auto& [fid, f] : factors_) {
      if (std::holds_alternative<PoseAnchorFactor>(f)) {
        anchored = true;
        break;
      }
    }
    if (!anchored) {
      throw Error(ErrorCode::SingularSystem,
                  "graph has keyframes but no anchor factor");
    }
  }

  const StateIndex idx = build_index(*this);
  OptReport report;
  report.initial_cost = total_cost(config);
  report.final_cost = report.initial_cost;
  if (idx.dim == 0 || factors_.empty()) {
    report.converged = true;
    return report;
  }

  double lambda = config.initial_lambda;
  double cost = report.initial_cost;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    // Assemble the damped normal equations in fixed factor-id order.
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd gradient = Eigen::VectorXd::Zero(idx.dim);
    for (const auto& [fid, f] : factors_) {
      const FactorBlocks b = evaluate_factor(fid);
      const double chi2 = b.residual.dot(b.information * b.residual);
      const double w = huber_weight(chi2, config.huber_delta);
      for (std::size_t i = 0; i < b.variables.size(); ++i) {
        const int oi = idx.offset.at(b.variables[i]);
        const Eigen::MatrixXd JtW =
            w * b.jacobians[i].transpose() * b.information;
        gradient.segment(oi, b.jacobians[i].cols()) += JtW * b.residual;
        for (std::size_t j = 0; j < b.variables.size(); ++j) {
          const int oj = idx.offset.at(b.variables[j]);
          const Eigen::MatrixXd H = JtW * b.jacobians[j];
          for (int r = 0; r < H.rows(); ++r) {
            for (int c = 0; c < H.cols(); ++c) {
              triplets.emplace_back(oi + r, oj + c, H(r, c));
            }
          }
        }
      }
    }

    if (gradient.lpNorm<Eigen::Infinity>() < 1e-15) {
      report.converged = true;
      break;
    }

    bool accepted = false;
    while (lambda <= config.lambda_max) {
      std::vector<Eigen::Triplet<double>> damped = triplets;
      for (int i = 0; i < idx.dim; ++i) damped.emplace_back(i, i, lambda);
      Eigen::SparseMatrix<double> H(idx.dim, idx.dim);
      H.setFromTriplets(damped.begin(), damped.end());

      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(H);
      if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::SingularSystem,
                    "damped normal equations could not be factorized");
      }
      const Eigen::VectorXd step = solver.solve(-gradient);
      if (!step.allFinite()) {
        throw Error(ErrorCode::SingularSystem, "non-finite update step");
      }

      // Trial state.
      std::map<VariableId, Variable> backup = variables_;
      for (const VariableId& id : idx.order) {
        const Variable& v = variables_.at(id);
        variables_.at(id) = variable_retract(
            v, step.segment(idx.offset.at(id), variable_local_dim(v)));
      }
      const double new_cost = total_cost(config);
      if (new_cost <= cost) {
        const double decrease = (cost - new_cost) / std::max(cost, 1e-300);
        cost = new_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        ++report.iterations;
        if (decrease < config.relative_decrease_tol) {
          report.converged = true;
        }
        break;
      }
      variables_ = std::move(backup);
      lambda *= 10.0;
    }

    // Damping exhausted without an acceptable step: stop where we are.
    if (!accepted) break;
    if (report.converged) break;
  }

  report.final_cost = cost;
  return report;
}

}  // namespace sgraphs
