#pragma once

#include <Eigen/Sparse>
#include <vector>

#include "gridcurb/network.hpp"

namespace gridcurb {

using SparseComplex = Eigen::SparseMatrix<Complex>;

/// Bus admittance matrix. Row/column k corresponds to bus_ids[k], ascending.
struct YBus {
    SparseComplex y;
    std::vector<int> bus_ids;

    Eigen::Index index_of(int bus_id) const;
    Complex at(int from_id, int to_id) const { return y.coeff(index_of(from_id), index_of(to_id)); }
    Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(y); }
};

/// Matrix index ordering shared by every solver: ascending bus id.
std::vector<int> sorted_bus_ids(const Network& network);

YBus build_ybus(const Network& network);

/// YBus permuted into [load | generator] blocks.
///
///   [ I_L ]   [ Y_LL  Y_LG ] [ V_L ]
///   [ I_G ] = [ Y_GL  Y_GG ] [ V_G ]
struct PartitionedY {
    SparseComplex y_ll, y_lg, y_gl, y_gg;
    std::vector<int> load_bus_ids;       // ascending
    std::vector<int> generator_bus_ids;  // ascending
    /// permutation[k] = YBus index placed at partitioned position k.
    std::vector<Eigen::Index> permutation;

    /// Blocks stitched back together in YBus ordering.
    SparseComplex reassemble() const;
};

class PartitionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Generator buses are Slack and PV buses; all others are load buses.
PartitionedY partition(const YBus& ybus, const Network& network);

}  // namespace gridcurb
