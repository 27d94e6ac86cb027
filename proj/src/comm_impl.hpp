#pragma once

#include <memory>

#include "oocnmf/comm.hpp"

namespace oocnmf::detail {

class CollectiveImpl {
public:
    explicit CollectiveImpl(int n) : n_(n) {}
    virtual ~CollectiveImpl() = default;
    int size() const { return n_; }
    virtual void all_reduce_sum(int rank, DenseMatrix& buffer, PhaseTag tag) = 0;

protected:
    int n_;
};

CommHandle make_handle(std::shared_ptr<CollectiveImpl> impl, int rank);

} // namespace oocnmf::detail
