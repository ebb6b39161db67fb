#include "gridsec/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace gridsec {

std::vector<int> MeasurementModel::rows_touching_buses(const std::vector<int>& bus_ids) const {
    auto hit = [&](int id) { return std::find(bus_ids.begin(), bus_ids.end(), id) != bus_ids.end(); };
    std::vector<int> out;
    for (int i = 0; i < n_rows(); ++i) {
        const auto& r = rows[i];
        if (hit(r.bus) || (r.other >= 0 && hit(r.other))) out.push_back(i);
    }
    return out;
}

MeasurementModel build_measurement_matrix(const DescriptorSystem& sys,
                                          const MeasurementOptions& opts) {
    const GridCase& grid = sys.grid();
    const StateLayout& L = sys.layout();
    if (grid.pmu_buses.empty()) throw CaseError("case has no PMU buses");

    MeasurementModel model;
    std::vector<Eigen::RowVectorXd> rows;

    for (int id : grid.pmu_buses) {
        const int b = grid.bus_index(id);
        Eigen::RowVectorXd rv = Eigen::RowVectorXd::Zero(L.n_total());
        rv[L.v(b)] = 1.0;
        rows.push_back(rv);
        model.rows.push_back({MeasurementKind::VoltageMag, id, -1, "v_b" + std::to_string(id)});

        Eigen::RowVectorXd ra = Eigen::RowVectorXd::Zero(L.n_total());
        ra[L.theta(b)] = 1.0;
        rows.push_back(ra);
        model.rows.push_back({MeasurementKind::VoltageAngle, id, -1, "th_b" + std::to_string(id)});
    }

    if (opts.include_line_currents) {
        const Eigen::VectorXd& x0 = sys.operating_point();
        for (auto [fid, tid] : grid.pmu_lines) {
            const Branch* br = nullptr;
            for (const auto& cand : grid.branches)
                if ((cand.from == fid && cand.to == tid) || (cand.from == tid && cand.to == fid)) {
                    br = &cand;
                    break;
                }
            if (br == nullptr)
                throw CaseError("pmu line " + std::to_string(fid) + "-" + std::to_string(tid) +
                                " not in branch list");
            // Orient the measurement at the listed from-end.
            const int i = grid.bus_index(fid);
            const int j = grid.bus_index(tid);
            const std::complex<double> ys = 1.0 / std::complex<double>(br->r, br->x);
            const std::complex<double> sh(0.0, br->b_shunt / 2.0);

            const double vi = x0[L.v(i)], thi = x0[L.theta(i)];
            const double vj = x0[L.v(j)], thj = x0[L.theta(j)];
            const std::complex<double> ei = std::polar(1.0, thi);
            const std::complex<double> ej = std::polar(1.0, thj);
            const std::complex<double> cur = (vi * ei - vj * ej) * ys + vi * ei * sh;
            const double mag = std::abs(cur);
            if (mag < 1e-9)
                throw CaseError("line " + std::to_string(fid) + "-" + std::to_string(tid) +
                                " carries no current at the operating point; its phasor "
                                "angle cannot be linearized");

            // dI/d(v_i, th_i, v_j, th_j) in complex form.
            const std::complex<double> d_vi = ei * (ys + sh);
            const std::complex<double> d_thi = std::complex<double>(0, 1) * vi * ei * (ys + sh);
            const std::complex<double> d_vj = -ej * ys;
            const std::complex<double> d_thj = std::complex<double>(0, 1) * (-vj) * ej * ys;

            auto mag_partial = [&](const std::complex<double>& dz) {
                return (cur.real() * dz.real() + cur.imag() * dz.imag()) / mag;
            };
            auto ang_partial = [&](const std::complex<double>& dz) {
                return (cur.real() * dz.imag() - cur.imag() * dz.real()) / (mag * mag);
            };

            Eigen::RowVectorXd rm = Eigen::RowVectorXd::Zero(L.n_total());
            rm[L.v(i)] = mag_partial(d_vi);
            rm[L.theta(i)] = mag_partial(d_thi);
            rm[L.v(j)] = mag_partial(d_vj);
            rm[L.theta(j)] = mag_partial(d_thj);
            rows.push_back(rm);
            model.rows.push_back({MeasurementKind::CurrentMag, fid, tid,
                                  "imag_l" + std::to_string(fid) + "_" + std::to_string(tid)});

            Eigen::RowVectorXd ra = Eigen::RowVectorXd::Zero(L.n_total());
            ra[L.v(i)] = ang_partial(d_vi);
            ra[L.theta(i)] = ang_partial(d_thi);
            ra[L.v(j)] = ang_partial(d_vj);
            ra[L.theta(j)] = ang_partial(d_thj);
            rows.push_back(ra);
            model.rows.push_back({MeasurementKind::CurrentAngle, fid, tid,
                                  "iang_l" + std::to_string(fid) + "_" + std::to_string(tid)});
        }
    }

    model.c.resize(static_cast<int>(rows.size()), L.n_total());
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) model.c.row(i) = rows[i];
    return model;
}

} // namespace gridsec
