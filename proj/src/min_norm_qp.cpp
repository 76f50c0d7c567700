#include "min_norm_qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace pacverify::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ActiveSet {
  Eigen::MatrixXd J;  // orthogonal factor, J^T N = [R; 0] for active normals N
  Eigen::MatrixXd R;  // upper triangular, leading iq×iq block in use
  std::vector<Eigen::Index> rows;
  std::vector<double> u;  // multipliers of the active constraints
  double r_norm = 1.0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(rows.size()); }
};

// Rotates columns (a, b) of J, applying the 2×2 reflection [cc ss; ss -cc].
void rotate_columns(Eigen::MatrixXd& J, Eigen::Index a, Eigen::Index b, double cc, double ss) {
  const double xny = ss / (1.0 + cc);
  for (Eigen::Index k = 0; k < J.rows(); ++k) {
    const double t1 = J(k, a);
    const double t2 = J(k, b);
    J(k, a) = t1 * cc + t2 * ss;
    J(k, b) = xny * (t1 + J(k, a)) - t2;
  }
}

// `d` is J^T n for the constraint being added. Returns false when the new
// normal is numerically dependent on the active ones.
bool add_constraint(ActiveSet& set, Eigen::VectorXd d) {
  const Eigen::Index n = set.J.rows();
  const Eigen::Index iq = set.size();
  for (Eigen::Index j = n - 1; j > iq; --j) {
    double cc = d(j - 1);
    double ss = d(j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    d(j) = 0.0;
    cc /= h;
    ss /= h;
    if (cc < 0.0) {
      cc = -cc;
      ss = -ss;
      d(j - 1) = -h;
    } else {
      d(j - 1) = h;
    }
    rotate_columns(set.J, j - 1, j, cc, ss);
  }
  if (std::abs(d(iq)) <= std::numeric_limits<double>::epsilon() * set.r_norm * 10) return false;
  set.R.col(iq).head(iq + 1) = d.head(iq + 1);
  set.r_norm = std::max(set.r_norm, std::abs(d(iq)));
  return true;
}

void drop_constraint(ActiveSet& set, Eigen::Index k) {
  const Eigen::Index n = set.J.rows();
  Eigen::Index iq = set.size();
  set.rows.erase(set.rows.begin() + k);
  set.u.erase(set.u.begin() + k);
  for (Eigen::Index c = k; c < iq - 1; ++c) set.R.col(c).head(iq) = set.R.col(c + 1).head(iq);
  set.R.col(iq - 1).setZero();
  --iq;
  for (Eigen::Index j = k; j < iq; ++j) {
    double cc = set.R(j, j);
    double ss = set.R(j + 1, j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    cc /= h;
    ss /= h;
    set.R(j + 1, j) = 0.0;
    if (cc < 0.0) {
      set.R(j, j) = -h;
      cc = -cc;
      ss = -ss;
    } else {
      set.R(j, j) = h;
    }
    const double xny = ss / (1.0 + cc);
    for (Eigen::Index c = j + 1; c < iq; ++c) {
      const double t1 = set.R(j, c);
      const double t2 = set.R(j + 1, c);
      set.R(j, c) = t1 * cc + t2 * ss;
      set.R(j + 1, c) = xny * (t1 + set.R(j, c)) - t2;
    }
    rotate_columns(set.J, j, j + 1, cc, ss);
  }
  (void)n;
}

}  // namespace

MinNormResult min_norm_point(const Eigen::MatrixXd& C_in, const Eigen::VectorXd& d_in) {
  const Eigen::Index n = C_in.cols();
  const Eigen::Index m = C_in.rows();
  MinNormResult result;
  result.x = Eigen::VectorXd::Zero(n);

  // Unit-normal rows make the violation test scale-free.
  Eigen::MatrixXd C = C_in;
  Eigen::VectorXd d = d_in;
  std::vector<bool> usable(static_cast<std::size_t>(m), true);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double norm = C.row(i).norm();
    if (norm == 0.0) {
      usable[i] = false;
      if (d(i) > 1e-12) return result;  // 0 >= d(i) > 0 is infeasible
      continue;
    }
    C.row(i) /= norm;
    d(i) /= norm;
  }
  const double viol_tol = 1e-13 * (1.0 + d.lpNorm<Eigen::Infinity>());

  ActiveSet set;
  set.J = Eigen::MatrixXd::Identity(n, n);
  set.R = Eigen::MatrixXd::Zero(n, n);
  std::vector<bool> excluded(static_cast<std::size_t>(m), false);
  std::vector<bool> active(static_cast<std::size_t>(m), false);
  Eigen::VectorXd& x = result.x;
  const long max_iter = 50 * (n + 10) + 2 * m;

  while (result.iterations < max_iter) {
    // Step 1: most violated inactive constraint.
    const Eigen::VectorXd slack = C * x - d;
    Eigen::Index ip = -1;
    double worst = -viol_tol;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!usable[i] || active[i] || excluded[i]) continue;
      if (slack(i) < worst) {
        worst = slack(i);
        ip = i;
      }
    }
    if (ip < 0) {
      result.converged = true;
      return result;
    }

    const Eigen::VectorXd saved_x = x;
    const ActiveSet saved_set = set;
    const Eigen::VectorXd np = C.row(ip).transpose();
    double s_ip = slack(ip);
    double u_new = 0.0;

    // Step 2: move until ip becomes satisfied, dropping blocking constraints.
    for (;;) {
      ++result.iterations;
      if (result.iterations >= max_iter) return result;
      const Eigen::Index iq = set.size();
      const Eigen::VectorXd dvec = set.J.transpose() * np;
      const Eigen::VectorXd z = set.J.rightCols(n - iq) * dvec.tail(n - iq);
      Eigen::VectorXd r(iq);
      if (iq > 0) {
        r = set.R.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(dvec.head(iq));
      }

      double t1 = kInf;
      Eigen::Index drop = -1;
      for (Eigen::Index k = 0; k < iq; ++k) {
        if (r(k) > 0.0 && set.u[k] / r(k) < t1) {
          t1 = set.u[k] / r(k);
          drop = k;
        }
      }
      double t2 = kInf;
      const double zn = z.dot(np);
      if (z.squaredNorm() > 1e-24 && zn > 0.0) t2 = -s_ip / zn;

      const double t = std::min(t1, t2);
      if (t == kInf) return result;  // infeasible

      if (t2 == kInf) {
        for (Eigen::Index k = 0; k < iq; ++k) set.u[k] -= t * r(k);
        u_new += t;
        active[set.rows[drop]] = false;
        drop_constraint(set, drop);
        continue;
      }

      x += t * z;
      for (Eigen::Index k = 0; k < iq; ++k) set.u[k] -= t * r(k);
      u_new += t;

      if (t == t2) {
        if (!add_constraint(set, dvec)) {
          x = saved_x;
          set = saved_set;
          for (Eigen::Index i = 0; i < m; ++i) active[i] = false;
          for (Eigen::Index row : set.rows) active[row] = true;
          excluded[ip] = true;
        } else {
          set.rows.push_back(ip);
          set.u.push_back(u_new);
          active[ip] = true;
        }
        break;
      }

      active[set.rows[drop]] = false;
      drop_constraint(set, drop);
      s_ip = np.dot(x) - d(ip);
    }
  }
  return result;
}

}  // namespace pacverify::detail
