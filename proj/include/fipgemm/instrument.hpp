#pragma once

#include <cstdint>

namespace fipgemm {

// Event counts for instrumented runs. Passing a counter set to gemm or the
// kernels selects the counting code path; a null pointer selects the
// uncounted one, so timed runs pay nothing.
struct AccessCounters {
    std::uint64_t a_unpacked_reads = 0;  // element loads from strided A storage
    std::uint64_t b_unpacked_reads = 0;
    std::uint64_t a_packed_reads = 0;    // element loads from packed micropanels
    std::uint64_t b_packed_reads = 0;
    std::uint64_t a_pack_writes = 0;     // element stores into packed micropanels
    std::uint64_t b_pack_writes = 0;
    std::uint64_t barrier_count = 0;     // rendezvous events (threaded runs)

    void add(const AccessCounters& o) {
        a_unpacked_reads += o.a_unpacked_reads;
        b_unpacked_reads += o.b_unpacked_reads;
        a_packed_reads += o.a_packed_reads;
        b_packed_reads += o.b_packed_reads;
        a_pack_writes += o.a_pack_writes;
        b_pack_writes += o.b_pack_writes;
        barrier_count += o.barrier_count;
    }
};

}  // namespace fipgemm
