#include "gridsec/ybus.hpp"

namespace gridsec {

AdmittanceMatrix build_ybus(const GridCase& grid) {
    const int n = grid.n_buses();
    AdmittanceMatrix y = AdmittanceMatrix::Zero(n, n);
    for (const auto& br : grid.branches) {
        if (br.r == 0.0 && br.x == 0.0)
            throw CaseError("zero-impedance branch " + std::to_string(br.from) + "-" +
                            std::to_string(br.to));
        const int i = grid.bus_index(br.from);
        const int j = grid.bus_index(br.to);
        const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
        const std::complex<double> sh(0.0, br.b_shunt / 2.0);
        y(i, j) -= ys;
        y(j, i) -= ys;
        y(i, i) += ys + sh;
        y(j, j) += ys + sh;
    }
    return y;
}

} // namespace gridsec
