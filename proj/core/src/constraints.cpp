#include "gridsec/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace gridsec {

ConstraintEvaluator::ConstraintEvaluator(const DescriptorSystem& sys) : sys_(&sys) {
    const GridCase& grid = sys.grid();
    for (int g = 0; g < grid.n_generators(); ++g) {
        rows_.push_back({LimitKind::PgMax, g});
        rows_.push_back({LimitKind::PgMin, g});
        rows_.push_back({LimitKind::QgMax, g});
        rows_.push_back({LimitKind::QgMin, g});
    }
    for (int b = 0; b < grid.n_buses(); ++b) {
        rows_.push_back({LimitKind::VMax, b});
        rows_.push_back({LimitKind::VMin, b});
    }
    for (int k = 0; k < static_cast<int>(grid.branches.size()); ++k) {
        if (grid.branches[k].rating > 0.0) {
            rows_.push_back({LimitKind::FlowFrom, k});
            rows_.push_back({LimitKind::FlowTo, k});
            rated_branches_.push_back(k);
        }
    }
}

Eigen::VectorXd ConstraintEvaluator::g(const Eigen::VectorXd& x) const {
    return sys_->algebraic_residual(x, sys_->nominal_disturbance());
}

Eigen::MatrixXd ConstraintEvaluator::g_jacobian(const Eigen::VectorXd& x) const {
    return sys_->algebraic_jacobian(x);
}

Eigen::VectorXd ConstraintEvaluator::h(const Eigen::VectorXd& x) const {
    const GridCase& grid = sys_->grid();
    const StateLayout& L = sys_->layout();
    const int nb = L.n_bus();

    Eigen::VectorXd v(nb), th(nb);
    for (int b = 0; b < nb; ++b) {
        v[b] = x[L.v(b)];
        th[b] = x[L.theta(b)];
    }
    Eigen::VectorXd s_from, s_to;
    branch_flows(grid, v, th, s_from, s_to);

    Eigen::VectorXd out(n_h());
    for (int i = 0; i < n_h(); ++i) {
        const auto& row = rows_[i];
        switch (row.kind) {
        case LimitKind::PgMax:
            out[i] = x[L.p_g(row.index)] - grid.generators[row.index].p_max;
            break;
        case LimitKind::PgMin:
            out[i] = grid.generators[row.index].p_min - x[L.p_g(row.index)];
            break;
        case LimitKind::QgMax:
            out[i] = x[L.q_g(row.index)] - grid.generators[row.index].q_max;
            break;
        case LimitKind::QgMin:
            out[i] = grid.generators[row.index].q_min - x[L.q_g(row.index)];
            break;
        case LimitKind::VMax:
            out[i] = x[L.v(row.index)] - grid.buses[row.index].v_max;
            break;
        case LimitKind::VMin:
            out[i] = grid.buses[row.index].v_min - x[L.v(row.index)];
            break;
        case LimitKind::FlowFrom:
            out[i] = s_from[row.index] - grid.branches[row.index].rating;
            break;
        case LimitKind::FlowTo:
            out[i] = s_to[row.index] - grid.branches[row.index].rating;
            break;
        }
    }
    return out;
}

Eigen::MatrixXd ConstraintEvaluator::h_jacobian(const Eigen::VectorXd& x) const {
    const GridCase& grid = sys_->grid();
    const StateLayout& L = sys_->layout();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n_h(), sys_->n_total());

    for (int i = 0; i < n_h(); ++i) {
        const auto& row = rows_[i];
        switch (row.kind) {
        case LimitKind::PgMax: jac(i, L.p_g(row.index)) = 1.0; break;
        case LimitKind::PgMin: jac(i, L.p_g(row.index)) = -1.0; break;
        case LimitKind::QgMax: jac(i, L.q_g(row.index)) = 1.0; break;
        case LimitKind::QgMin: jac(i, L.q_g(row.index)) = -1.0; break;
        case LimitKind::VMax: jac(i, L.v(row.index)) = 1.0; break;
        case LimitKind::VMin: jac(i, L.v(row.index)) = -1.0; break;
        case LimitKind::FlowFrom:
        case LimitKind::FlowTo: {
            const auto& br = grid.branches[row.index];
            const bool from_end = row.kind == LimitKind::FlowFrom;
            const int bi = grid.bus_index(from_end ? br.from : br.to);
            const int bj = grid.bus_index(from_end ? br.to : br.from);
            const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
            const std::complex<double> sh(0.0, br.b_shunt / 2.0);
            const double vi = x[L.v(bi)], thi = x[L.theta(bi)];
            const double vj = x[L.v(bj)], thj = x[L.theta(bj)];
            const std::complex<double> ei = std::polar(1.0, thi);
            const std::complex<double> ej = std::polar(1.0, thj);
            const std::complex<double> vip = vi * ei, vjp = vj * ej;
            const std::complex<double> cur = (vip - vjp) * ys + vip * sh;
            const std::complex<double> s = vip * std::conj(cur);
            const double mag = std::abs(s);
            if (mag < 1e-12) break; // flat flow; gradient treated as zero

            // dS/dp = dV_i/dp conj(I) + V_i conj(dI/dp)
            auto add = [&](int col, const std::complex<double>& dvi,
                           const std::complex<double>& di) {
                const std::complex<double> ds = dvi * std::conj(cur) + vip * std::conj(di);
                jac(i, col) += (s.real() * ds.real() + s.imag() * ds.imag()) / mag;
            };
            add(L.v(bi), ei, ei * (ys + sh));
            add(L.theta(bi), std::complex<double>(0, 1) * vip,
                std::complex<double>(0, 1) * vip * (ys + sh));
            add(L.v(bj), 0.0, -ej * ys);
            add(L.theta(bj), 0.0, std::complex<double>(0, 1) * (-vjp) * ys);
            break;
        }
        }
    }
    return jac;
}

ConstraintReport ConstraintEvaluator::report(const Eigen::VectorXd& x, double zeta) const {
    ConstraintReport rep;
    rep.zeta = zeta;
    rep.g_values = g(x);
    rep.h_values = h(x);
    rep.g_abs_sum = std::abs(rep.g_values.sum());
    rep.violation_count = static_cast<int>((rep.h_values.array() > 0.0).count());
    if (rep.g_abs_sum > zeta) ++rep.violation_count;
    return rep;
}

std::vector<int> ConstraintEvaluator::g_rows_for_buses(
    const std::vector<int>& bus_indices) const {
    const GridCase& grid = sys_->grid();
    const int ng = grid.n_generators();
    const int nb = grid.n_buses();
    auto in = [&](int b) {
        return std::find(bus_indices.begin(), bus_indices.end(), b) != bus_indices.end();
    };
    std::vector<int> rows;
    for (int g = 0; g < ng; ++g) {
        if (in(grid.bus_index(grid.generators[g].bus))) {
            rows.push_back(g);
            rows.push_back(ng + g);
        }
    }
    for (int b = 0; b < nb; ++b) {
        if (in(b)) {
            rows.push_back(2 * ng + b);
            rows.push_back(2 * ng + nb + b);
        }
    }
    return rows;
}

std::vector<int> ConstraintEvaluator::h_rows_for_buses(
    const std::vector<int>& bus_indices) const {
    const GridCase& grid = sys_->grid();
    auto in = [&](int b) {
        return std::find(bus_indices.begin(), bus_indices.end(), b) != bus_indices.end();
    };
    std::vector<int> rows;
    for (int i = 0; i < n_h(); ++i) {
        const auto& row = rows_[i];
        bool keep = false;
        switch (row.kind) {
        case LimitKind::PgMax:
        case LimitKind::PgMin:
        case LimitKind::QgMax:
        case LimitKind::QgMin:
            keep = in(grid.bus_index(grid.generators[row.index].bus));
            break;
        case LimitKind::VMax:
        case LimitKind::VMin:
            keep = in(row.index);
            break;
        case LimitKind::FlowFrom:
        case LimitKind::FlowTo:
            keep = in(grid.bus_index(grid.branches[row.index].from)) &&
                   in(grid.bus_index(grid.branches[row.index].to));
            break;
        }
        if (keep) rows.push_back(i);
    }
    return rows;
}

ConstraintReport eval_constraints(const ConstraintEvaluator& eval, const Eigen::VectorXd& x,
                                  double zeta) {
    return eval.report(x, zeta);
}

ConstraintLinearization linearize_constraints(const ConstraintEvaluator& eval,
                                              const Eigen::VectorXd& x0) {
    ConstraintLinearization lin;
    lin.g0 = eval.g(x0);
    lin.grad_g = eval.g_jacobian(x0);
    return lin;
}

} // namespace gridsec
