#include <pmem/memory_map.hpp>

#include <vector>

int main() {
    pmem::FeatureGrid grid(pmem::GridSpec::desk());
    const std::vector<float> feature(12, 1.0f);
    grid.merge_max(pmem::CellIndex{1, 2, 3}, feature);
    return grid.count() == 1 ? 0 : 1;
}
