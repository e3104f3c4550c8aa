#include <cmath>
#include <fstream>

#include <Eigen/Dense>

#include "rebalance/error.hpp"
#include "rebalance/experiment.hpp"

namespace rebalance {

Projection project_2d(const EmbeddingDataset& dataset) {
    const std::size_t n = dataset.size();
    const std::size_t d = dataset.dim();
    if (n < 2) throw PreconditionError("project_2d: need at least 2 samples");

    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        auto r = dataset.row(i);
        for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[j];
    }
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);

    Projection out;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const auto& values = solver.eigenvalues();  // ascending
    const double top = values(values.size() - 1);

    std::array<Eigen::VectorXd, 2> axes{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)),
                                        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d))};
    if (!(top > 1e-12)) {
        out.warnings.push_back("zero-variance data; all projected coordinates are 0");
    } else {
        for (std::size_t a = 0; a < 2 && a < d; ++a) {
            Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - a));
            if (values(static_cast<Eigen::Index>(d - 1 - a)) <= 1e-12 * top) continue;
            Eigen::Index peak = 0;
            v.cwiseAbs().maxCoeff(&peak);
            if (v(peak) < 0) v = -v;
            axes[a] = v;
        }
    }
    out.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = x.row(static_cast<Eigen::Index>(i));
        out.points.push_back({row.dot(axes[0]), row.dot(axes[1]), dataset.label(i), dataset.origin(i)});
    }
    return out;
}

void save_projection_csv(const Projection& projection, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.precision(17);
    out << "x,y,label,origin\n";
    for (const auto& p : projection.points)
        out << p.x << ',' << p.y << ',' << p.label << ',' << origin_name(p.origin) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace rebalance
