#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace msca {

struct MemoryAccessRecord {
  std::uint64_t instruction_address = 0;
  std::uint64_t memory_address = 0;

  friend bool operator==(const MemoryAccessRecord&, const MemoryAccessRecord&) = default;
};

/// Ordered memory accesses of one victim execution, exactly as executed.
struct MemoryTrace {
  std::vector<MemoryAccessRecord> records;
  std::string victim_id;
};

enum class ChannelFamily { CacheBank, CacheLine, PageTable };

/// Address-to-record mapping of one side channel. CacheBank and CacheLine
/// shift the address right; PageTable clears the page-offset bits.
class ChannelKind {
 public:
  static ChannelKind cache_bank(unsigned shift = 2);
  static ChannelKind cache_line(unsigned shift = 6);
  static ChannelKind page_table(std::uint64_t page_mask = 4095);

  /// Accepts "cachebank", "cacheline", "pagetable", optionally followed by
  /// ":<param>" to override the shift or page mask.
  static ChannelKind parse(std::string_view text);

  ChannelFamily family() const { return family_; }
  unsigned shift() const { return shift_; }
  std::uint64_t page_mask() const { return page_mask_; }
  bool is_default() const;

  /// Short name used in file headers, e.g. "cacheline" or "cacheline:7".
  std::string name() const;

  std::uint64_t derive(std::uint64_t address) const {
    switch (family_) {
      case ChannelFamily::CacheBank:
      case ChannelFamily::CacheLine:
        return shift_ >= 64 ? 0 : address >> shift_;
      case ChannelFamily::PageTable:
        return address & ~page_mask_;
    }
    return 0;
  }

  friend bool operator==(const ChannelKind&, const ChannelKind&) = default;

 private:
  ChannelKind(ChannelFamily family, unsigned shift, std::uint64_t page_mask)
      : family_(family), shift_(shift), page_mask_(page_mask) {}

  ChannelFamily family_;
  unsigned shift_;
  std::uint64_t page_mask_;
};

struct SideChannelTrace {
  ChannelKind kind = ChannelKind::cache_line();
  std::vector<std::uint64_t> records;
  // True when records[i] was derived from memory record i of a MemoryTrace.
  bool aligned = false;
};

/// Reads `<ip_hex> <addr_hex>` lines. `#` lines and blank lines are skipped.
MemoryTrace parse_memory_trace(std::istream& in, std::string victim_id = {});
void write_memory_trace(std::ostream& out, const MemoryTrace& trace);

SideChannelTrace derive_side_channel(const MemoryTrace& trace, ChannelKind kind);

void write_side_channel(std::ostream& out, const SideChannelTrace& trace);
SideChannelTrace read_side_channel(std::istream& in);

}  // namespace msca
