#include "gridcurb/admittance.hpp"

#include <algorithm>

namespace gridcurb {

Eigen::Index YBus::index_of(int bus_id) const {
    const auto it = std::lower_bound(bus_ids.begin(), bus_ids.end(), bus_id);
    if (it == bus_ids.end() || *it != bus_id)
        throw NetworkError("bus " + std::to_string(bus_id) + " not in admittance matrix");
    return static_cast<Eigen::Index>(it - bus_ids.begin());
}

std::vector<int> sorted_bus_ids(const Network& network) {
    std::vector<int> ids;
    ids.reserve(network.buses.size());
    for (const auto& b : network.buses) ids.push_back(b.id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

YBus build_ybus(const Network& network) {
    YBus out;
    out.bus_ids = sorted_bus_ids(network);
    const auto n = static_cast<Eigen::Index>(out.bus_ids.size());

    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(network.branches.size() * 4);
    for (const auto& br : network.branches) {
        if (!br.in_service) continue;
        const auto f = out.index_of(br.from_bus);
        const auto t = out.index_of(br.to_bus);
        const Complex ys = br.series_admittance();
        const Complex ysh(0.0, br.b / 2.0);
        trip.emplace_back(f, f, ys + ysh);
        trip.emplace_back(t, t, ys + ysh);
        trip.emplace_back(f, t, -ys);
        trip.emplace_back(t, f, -ys);
    }
    out.y.resize(n, n);
    out.y.setFromTriplets(trip.begin(), trip.end());
    out.y.makeCompressed();
    return out;
}

namespace {

SparseComplex extract(const Eigen::MatrixXcd& dense, const std::vector<Eigen::Index>& rows,
                      const std::vector<Eigen::Index>& cols) {
    std::vector<Eigen::Triplet<Complex>> trip;
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const Complex v = dense(rows[i], cols[j]);
            if (v != Complex{}) trip.emplace_back(i, j, v);
        }
    SparseComplex m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
}

}  // namespace

PartitionedY partition(const YBus& ybus, const Network& network) {
    PartitionedY out;
    std::vector<Eigen::Index> load_idx, gen_idx;
    for (std::size_t k = 0; k < ybus.bus_ids.size(); ++k) {
        const int id = ybus.bus_ids[k];
        if (network.bus(id).is_generator_bus()) {
            out.generator_bus_ids.push_back(id);
            gen_idx.push_back(static_cast<Eigen::Index>(k));
        } else {
            out.load_bus_ids.push_back(id);
            load_idx.push_back(static_cast<Eigen::Index>(k));
        }
    }
    if (gen_idx.empty()) throw PartitionError("partition needs at least one generator bus");
    if (load_idx.empty()) throw PartitionError("partition needs at least one load bus");

    const Eigen::MatrixXcd dense = ybus.dense();
    out.y_ll = extract(dense, load_idx, load_idx);
    out.y_lg = extract(dense, load_idx, gen_idx);
    out.y_gl = extract(dense, gen_idx, load_idx);
    out.y_gg = extract(dense, gen_idx, gen_idx);
    out.permutation = load_idx;
    out.permutation.insert(out.permutation.end(), gen_idx.begin(), gen_idx.end());
    return out;
}

SparseComplex PartitionedY::reassemble() const {
    const auto nl = static_cast<Eigen::Index>(load_bus_ids.size());
    const auto n = static_cast<Eigen::Index>(permutation.size());
    std::vector<Eigen::Triplet<Complex>> trip;
    auto place = [&](const SparseComplex& block, Eigen::Index row0, Eigen::Index col0) {
        for (Eigen::Index c = 0; c < block.outerSize(); ++c)
            for (SparseComplex::InnerIterator it(block, c); it; ++it)
                trip.emplace_back(permutation[row0 + it.row()], permutation[col0 + it.col()],
                                  it.value());
    };
    place(y_ll, 0, 0);
    place(y_lg, 0, nl);
    place(y_gl, nl, 0);
    place(y_gg, nl, nl);
    SparseComplex m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
}

}  // namespace gridcurb
