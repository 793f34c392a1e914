#include "msca/trace_model.hpp"

#include <bit>
#include <charconv>
#include <istream>
#include <ostream>

#include "msca/errors.hpp"

namespace msca {

namespace {

bool parse_hex(std::string_view token, std::uint64_t& value) {
  if (token.size() > 2 && token[0] == '0' && (token[1] == 'x' || token[1] == 'X')) {
    token.remove_prefix(2);
  }
  if (token.empty()) return false;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value, 16);
  return ec == std::errc() && ptr == end;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

ChannelKind ChannelKind::cache_bank(unsigned shift) {
  return ChannelKind(ChannelFamily::CacheBank, shift, 0);
}

ChannelKind ChannelKind::cache_line(unsigned shift) {
  return ChannelKind(ChannelFamily::CacheLine, shift, 0);
}

ChannelKind ChannelKind::page_table(std::uint64_t page_mask) {
  if (!std::has_single_bit(page_mask + 1)) {
    throw ConfigError("page mask + 1 must be a power of two, got mask " +
                      std::to_string(page_mask));
  }
  return ChannelKind(ChannelFamily::PageTable, 0, page_mask);
}

ChannelKind ChannelKind::parse(std::string_view text) {
  std::string_view base = text;
  std::string_view param;
  if (const auto colon = text.find(':'); colon != std::string_view::npos) {
    base = text.substr(0, colon);
    param = text.substr(colon + 1);
  }
  std::uint64_t value = 0;
  if (!param.empty()) {
    auto [ptr, ec] = std::from_chars(param.data(), param.data() + param.size(), value);
    if (ec != std::errc() || ptr != param.data() + param.size()) {
      throw ConfigError("bad channel parameter in '" + std::string(text) + "'");
    }
  }
  if (base == "cachebank") return param.empty() ? cache_bank() : cache_bank(unsigned(value));
  if (base == "cacheline") return param.empty() ? cache_line() : cache_line(unsigned(value));
  if (base == "pagetable") return param.empty() ? page_table() : page_table(value);
  throw ConfigError("unknown channel kind '" + std::string(text) +
                    "' (expected cachebank, cacheline or pagetable)");
}

bool ChannelKind::is_default() const {
  switch (family_) {
    case ChannelFamily::CacheBank: return shift_ == 2;
    case ChannelFamily::CacheLine: return shift_ == 6;
    case ChannelFamily::PageTable: return page_mask_ == 4095;
  }
  return true;
}

std::string ChannelKind::name() const {
  std::string base;
  std::string param;
  switch (family_) {
    case ChannelFamily::CacheBank:
      base = "cachebank";
      param = std::to_string(shift_);
      break;
    case ChannelFamily::CacheLine:
      base = "cacheline";
      param = std::to_string(shift_);
      break;
    case ChannelFamily::PageTable:
      base = "pagetable";
      param = std::to_string(page_mask_);
      break;
  }
  return is_default() ? base : base + ":" + param;
}

MemoryTrace parse_memory_trace(std::istream& in, std::string victim_id) {
  MemoryTrace trace;
  trace.victim_id = std::move(victim_id);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto split = body.find_first_of(" \t");
    if (split == std::string_view::npos) {
      throw ParseError(line_no, "expected '<ip> <addr>', got '" + std::string(body) + "'");
    }
    const auto ip_tok = body.substr(0, split);
    const auto addr_tok = trim(body.substr(split));
    MemoryAccessRecord rec;
    if (!parse_hex(ip_tok, rec.instruction_address) ||
        !parse_hex(addr_tok, rec.memory_address)) {
      throw ParseError(line_no, "malformed hex in '" + std::string(body) + "'");
    }
    trace.records.push_back(rec);
  }
  if (trace.records.empty()) throw DataError("memory trace is empty");
  return trace;
}

void write_memory_trace(std::ostream& out, const MemoryTrace& trace) {
  if (!trace.victim_id.empty()) out << "# victim=" << trace.victim_id << '\n';
  char buf[48];
  for (const auto& rec : trace.records) {
    auto* p = buf;
    *p++ = '0';
    *p++ = 'x';
    p = std::to_chars(p, buf + sizeof(buf), rec.instruction_address, 16).ptr;
    *p++ = ' ';
    *p++ = '0';
    *p++ = 'x';
    p = std::to_chars(p, buf + sizeof(buf), rec.memory_address, 16).ptr;
    *p++ = '\n';
    out.write(buf, p - buf);
  }
}

SideChannelTrace derive_side_channel(const MemoryTrace& trace, ChannelKind kind) {
  if (trace.records.empty()) throw DataError("cannot derive a side channel from an empty trace");
  SideChannelTrace out{kind, {}, true};
  out.records.reserve(trace.records.size());
  for (const auto& rec : trace.records) out.records.push_back(kind.derive(rec.memory_address));
  return out;
}

void write_side_channel(std::ostream& out, const SideChannelTrace& trace) {
  out << "kind=" << trace.kind.name() << '\n';
  for (auto r : trace.records) out << r << '\n';
}

SideChannelTrace read_side_channel(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("kind=")) {
    throw ParseError(1, "expected 'kind=<name>' header");
  }
  SideChannelTrace trace{ChannelKind::parse(trim(std::string_view(line).substr(5))), {}, false};
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
    if (ec != std::errc() || ptr != body.data() + body.size()) {
      throw ParseError(line_no, "expected a decimal index, got '" + std::string(body) + "'");
    }
    trace.records.push_back(v);
  }
  return trace;
}

}  // namespace msca
