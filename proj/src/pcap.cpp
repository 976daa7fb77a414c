#include "scout/pcap.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <unordered_set>

namespace scout {

namespace {

std::uint16_t be16(ByteView b, std::size_t off) { return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]); }

std::uint32_t be32(ByteView b, std::size_t off) {
  return (static_cast<std::uint32_t>(b[off]) << 24) | (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) | b[off + 3];
}

std::uint32_t le32(ByteView b, std::size_t off) {
  return (static_cast<std::uint32_t>(b[off + 3]) << 24) | (static_cast<std::uint32_t>(b[off + 2]) << 16) |
         (static_cast<std::uint32_t>(b[off + 1]) << 8) | b[off];
}

std::string hex_preview(ByteView b, std::size_t max = 16) {
  return to_hex(b.subspan(0, std::min(b.size(), max))) + (b.size() > max ? "..." : "");
}

std::string undecoded(ByteView b, std::string_view reason = {}) {
  std::string note = "undecoded: " + std::to_string(b.size()) + " bytes, hex preview <" + hex_preview(b) + ">";
  if (!reason.empty()) note += " (" + std::string(reason) + ")";
  return note;
}

std::string mac_text(ByteView b) {
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", b[0], b[1], b[2], b[3], b[4], b[5]);
  return buf;
}

std::string ipv4_text(ByteView b) {
  return std::to_string(b[0]) + "." + std::to_string(b[1]) + "." + std::to_string(b[2]) + "." + std::to_string(b[3]);
}

std::string ipv6_text(ByteView b) {
  char buf[INET6_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET6, b.data(), buf, sizeof buf);
  return buf;
}

constexpr std::size_t kMaxDnsName = 255;

}  // namespace

// ---- DNS -------------------------------------------------------------------

std::optional<std::string> read_dns_name(ByteView msg, std::size_t& offset) {
  std::string name;
  std::unordered_set<std::size_t> visited;
  std::size_t pos = offset;
  std::optional<std::size_t> resume;
  std::size_t wire_len = 0;
  while (true) {
    if (pos >= msg.size()) return std::nullopt;
    const std::uint8_t len = msg[pos];
    if (len == 0) {
      ++pos;
      break;
    }
    if ((len & 0xC0) == 0xC0) {
      if (pos + 1 >= msg.size()) return std::nullopt;
      const std::size_t target = static_cast<std::size_t>(((len & 0x3F) << 8) | msg[pos + 1]);
      if (target >= msg.size() || !visited.insert(target).second) return std::nullopt;
      if (!resume) resume = pos + 2;
      pos = target;
      continue;
    }
    if ((len & 0xC0) != 0) return std::nullopt;  // reserved label types
    if (pos + 1 + len > msg.size()) return std::nullopt;
    wire_len += 1u + len;
    if (wire_len + 1 > kMaxDnsName) return std::nullopt;
    if (!name.empty()) name.push_back('.');
    for (std::size_t i = 0; i < len; ++i) {
      const auto c = static_cast<unsigned char>(msg[pos + 1 + i]);
      if (c == '.' || c == '\\') {
        name.push_back('\\');
        name.push_back(static_cast<char>(c));
      } else if (c < 0x21 || c > 0x7E) {
        char esc[5];
        std::snprintf(esc, sizeof esc, "\\%03u", c);
        name += esc;
      } else {
        name.push_back(static_cast<char>(std::tolower(c)));
      }
    }
    pos += 1u + len;
  }
  offset = resume.value_or(pos);
  return name;
}

std::string dns_type_name(std::uint16_t type) {
  switch (type) {
    case 1: return "A";
    case 2: return "NS";
    case 5: return "CNAME";
    case 6: return "SOA";
    case 12: return "PTR";
    case 15: return "MX";
    case 16: return "TXT";
    case 28: return "AAAA";
    case 33: return "SRV";
    case 255: return "ANY";
    default: return "TYPE" + std::to_string(type);
  }
}

std::optional<DnsMessage> decode_dns(ByteView p) {
  if (p.size() < 12) return std::nullopt;
  DnsMessage m;
  m.id = be16(p, 0);
  m.is_response = (p[2] & 0x80) != 0;
  const std::uint16_t qd = be16(p, 4);
  const std::uint16_t an = be16(p, 6);
  std::size_t off = 12;
  for (std::uint16_t i = 0; i < qd; ++i) {
    auto name = read_dns_name(p, off);
    if (!name || off + 4 > p.size()) return std::nullopt;
    m.questions.push_back({std::move(*name), be16(p, off)});
    off += 4;
  }
  for (std::uint16_t i = 0; i < an; ++i) {
    auto name = read_dns_name(p, off);
    if (!name || off + 10 > p.size()) return std::nullopt;
    const std::uint16_t type = be16(p, off);
    const std::uint16_t rdlen = be16(p, off + 8);
    off += 10;
    if (off + rdlen > p.size()) return std::nullopt;
    const auto rdata = p.subspan(off, rdlen);
    std::string text;
    if (type == 1 && rdlen == 4) {
      text = ipv4_text(rdata);
    } else if (type == 28 && rdlen == 16) {
      text = ipv6_text(rdata);
    } else if (type == 5) {
      std::size_t roff = off;
      auto target = read_dns_name(p, roff);
      if (!target || roff > off + rdlen) return std::nullopt;
      text = *target;
    } else {
      text = "rtype " + std::to_string(type) + ", " + std::to_string(rdlen) + " bytes";
    }
    m.answers.push_back({std::move(*name), type, std::move(text)});
    off += rdlen;
  }
  return m;
}

// ---- layers ----------------------------------------------------------------

std::string icmp_type_name(std::uint8_t type) {
  switch (type) {
    case 0: return "echo-reply";
    case 3: return "dest-unreachable";
    case 5: return "redirect";
    case 8: return "echo-request";
    case 11: return "time-exceeded";
    default: return "type " + std::to_string(type);
  }
}

std::string icmp_code_name(std::uint8_t type, std::uint8_t code) {
  if (type == 3) {
    static constexpr const char* kUnreach[] = {"net-unreachable",      "host-unreachable",   "protocol-unreachable",
                                               "port-unreachable",     "fragmentation-needed", "source-route-failed"};
    if (code < std::size(kUnreach)) return kUnreach[code];
  } else if (type == 5) {
    static constexpr const char* kRedirect[] = {"net", "host", "tos-net", "tos-host"};
    if (code < std::size(kRedirect)) return kRedirect[code];
  } else if (type == 11) {
    if (code == 0) return "ttl-exceeded";
    if (code == 1) return "reassembly-exceeded";
  } else if (type == 0 || type == 8) {
    if (code == 0) return {};
  }
  return "code " + std::to_string(code);
}

namespace {

void decode_transport(DecodedLayers& out, std::uint8_t proto, ByteView seg) {
  switch (proto) {
    case 6: {
      if (seg.size() < 20) {
        out.raw_note = undecoded(seg, "short tcp header");
        return;
      }
      out.transport = TransportLayer{TransportKind::Tcp, be16(seg, 0), be16(seg, 2), {}, {}};
      return;
    }
    case 17: {
      if (seg.size() < 8) {
        out.raw_note = undecoded(seg, "short udp header");
        return;
      }
      const std::uint16_t sport = be16(seg, 0), dport = be16(seg, 2);
      out.transport = TransportLayer{TransportKind::Udp, sport, dport, {}, {}};
      const std::size_t udp_len = be16(seg, 4);
      const std::size_t end = (udp_len >= 8 && udp_len <= seg.size()) ? udp_len : seg.size();
      const auto payload = seg.subspan(8, end - 8);
      if (sport == 53 || dport == 53) {
        out.dns = decode_dns(payload);
        if (!out.dns) out.raw_note = undecoded(payload, "udp/53 payload is not DNS");
      }
      return;
    }
    case 1:
    case 58: {
      if (seg.size() < 4) {
        out.raw_note = undecoded(seg, "short icmp header");
        return;
      }
      out.transport = TransportLayer{TransportKind::Icmp, {}, {}, seg[0], seg[1]};
      return;
    }
    default:
      out.raw_note = undecoded(seg, "ip protocol " + std::to_string(proto));
  }
}

void decode_ipv4(DecodedLayers& out, ByteView b) {
  if (b.size() < 20 || (b[0] >> 4) != 4 || (b[0] & 0x0F) < 5) {
    out.raw_note = undecoded(b, "bad ipv4 header");
    return;
  }
  const std::size_t ihl = static_cast<std::size_t>(b[0] & 0x0F) * 4;
  if (ihl > b.size()) {
    out.raw_note = undecoded(b, "truncated ipv4 options");
    return;
  }
  out.ip = IpLayer{4, ipv4_text(b.subspan(12, 4)), ipv4_text(b.subspan(16, 4)), b[9]};
  const std::size_t total = be16(b, 2);
  const std::size_t end = (total >= ihl && total <= b.size()) ? total : b.size();
  const std::uint16_t frag = be16(b, 6) & 0x1FFF;
  const auto seg = b.subspan(ihl, end - ihl);
  if (frag != 0) {
    out.raw_note = undecoded(seg, "ipv4 fragment");
    return;
  }
  decode_transport(out, b[9], seg);
}

void decode_ipv6(DecodedLayers& out, ByteView b) {
  if (b.size() < 40 || (b[0] >> 4) != 6) {
    out.raw_note = undecoded(b, "bad ipv6 header");
    return;
  }
  std::uint8_t next = b[6];
  out.ip = IpLayer{6, ipv6_text(b.subspan(8, 16)), ipv6_text(b.subspan(24, 16)), next};
  const std::size_t plen = be16(b, 4);
  auto seg = b.subspan(40, std::min(plen, b.size() - 40));
  // Hop-by-hop, routing, fragment, destination options.
  for (int hops = 0; hops < 8 && (next == 0 || next == 43 || next == 44 || next == 60); ++hops) {
    if (seg.size() < 8) {
      out.raw_note = undecoded(seg, "truncated ipv6 extension header");
      return;
    }
    const std::size_t len = next == 44 ? 8 : (static_cast<std::size_t>(seg[1]) + 1) * 8;
    if (len > seg.size()) {
      out.raw_note = undecoded(seg, "truncated ipv6 extension header");
      return;
    }
    if (next == 44 && (be16(seg, 2) & 0xFFF8) != 0) {
      out.raw_note = undecoded(seg, "ipv6 fragment");
      return;
    }
    next = seg[0];
    seg = seg.subspan(len);
  }
  out.ip->protocol = next;
  decode_transport(out, next, seg);
}

}  // namespace

DecodedLayers decode_packet(std::uint32_t link_type, ByteView payload) {
  DecodedLayers out;
  if (link_type != kLinkTypeEthernet) {
    out.raw_note = undecoded(payload, "link type " + std::to_string(link_type));
    return out;
  }
  if (payload.size() < 14) {
    out.raw_note = undecoded(payload);
    return out;
  }
  EthernetLayer eth{mac_text(payload.subspan(6, 6)), mac_text(payload.subspan(0, 6)), be16(payload, 12)};
  std::size_t off = 14;
  if (eth.ethertype == 0x8100 && payload.size() >= 18) {
    eth.ethertype = be16(payload, 16);
    off = 18;
  }
  out.eth = eth;
  const auto body = payload.subspan(off);
  switch (eth.ethertype) {
    case 0x0800: decode_ipv4(out, body); break;
    case 0x86DD: decode_ipv6(out, body); break;
    case 0x0806: out.raw_note = undecoded(body, "arp"); break;
    default: {
      char et[8];
      std::snprintf(et, sizeof et, "0x%04x", eth.ethertype);
      out.raw_note = undecoded(body, std::string("ethertype ") + et);
    }
  }
  return out;
}

// ---- capture file ----------------------------------------------------------

PcapFile parse_pcap(ByteView bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::TruncatedGlobalHeader, "fewer than 4 bytes");
  PcapFile f;
  const std::uint32_t magic = be32(bytes, 0);
  switch (magic) {
    case 0xA1B2C3D4: f.byte_order = ByteOrder::BE; f.ts_resolution = TsResolution::Micro; break;
    case 0xD4C3B2A1: f.byte_order = ByteOrder::LE; f.ts_resolution = TsResolution::Micro; break;
    case 0xA1B23C4D: f.byte_order = ByteOrder::BE; f.ts_resolution = TsResolution::Nano; break;
    case 0x4D3CB2A1: f.byte_order = ByteOrder::LE; f.ts_resolution = TsResolution::Nano; break;
    default: {
      char buf[16];
      std::snprintf(buf, sizeof buf, "0x%08x", magic);
      throw Error(ErrorCode::BadMagic, buf);
    }
  }
  if (bytes.size() < 24) throw Error(ErrorCode::TruncatedGlobalHeader, std::to_string(bytes.size()) + " bytes");
  const bool le = f.byte_order == ByteOrder::LE;
  auto u32 = [&](std::size_t off) { return le ? le32(bytes, off) : be32(bytes, off); };
  auto u16 = [&](std::size_t off) {
    return le ? static_cast<std::uint16_t>(bytes[off] | (bytes[off + 1] << 8)) : be16(bytes, off);
  };
  f.version_major = u16(4);
  f.version_minor = u16(6);
  if (f.version_major != 2 || f.version_minor != 4)
    throw Error(ErrorCode::UnsupportedVersion,
                std::to_string(f.version_major) + "." + std::to_string(f.version_minor));
  f.link_type = u32(20) & 0x0FFFFFFF;  // upper bits carry FCS flags

  std::size_t off = 24;
  while (off < bytes.size()) {
    if (off + 16 > bytes.size()) {
      f.truncation_note = "truncated record header after packet " + std::to_string(f.packets.size());
      break;
    }
    PcapPacket p;
    p.index = f.packets.size() + 1;
    p.ts_sec = u32(off);
    p.ts_frac = u32(off + 4);
    p.captured_len = u32(off + 8);
    p.original_len = u32(off + 12);
    if (p.captured_len > bytes.size() - off - 16) {
      f.truncation_note = "truncated payload in packet " + std::to_string(p.index);
      break;
    }
    p.layers = decode_packet(f.link_type, bytes.subspan(off + 16, p.captured_len));
    off += 16 + static_cast<std::size_t>(p.captured_len);
    f.packets.push_back(std::move(p));
  }
  return f;
}

namespace {

std::string endpoint(const std::string& addr, int version, std::optional<std::uint16_t> port) {
  if (!port) return addr;
  return (version == 6 ? "[" + addr + "]" : addr) + ":" + std::to_string(*port);
}

std::string timestamp_text(std::uint32_t sec, std::uint32_t frac, TsResolution res) {
  std::string base = format_iso(UtcTime{std::chrono::seconds{sec}});
  base.pop_back();  // 'Z'
  char buf[16];
  if (res == TsResolution::Nano) std::snprintf(buf, sizeof buf, ".%09u", frac);
  else std::snprintf(buf, sizeof buf, ".%06u", frac);
  return base + buf + "Z";
}

std::string dns_summary(const DnsMessage& m) {
  char idbuf[8];
  std::snprintf(idbuf, sizeof idbuf, "0x%04x", m.id);
  std::string s = std::string(m.is_response ? "response " : "query ") + idbuf + ":";
  for (const auto& q : m.questions) s += " " + dns_type_name(q.qtype) + " " + (q.name.empty() ? "." : q.name);
  if (m.is_response) {
    if (m.answers.empty()) {
      s += " => no answers";
    } else {
      s += " =>";
      for (std::size_t i = 0; i < m.answers.size(); ++i) {
        const auto& a = m.answers[i];
        s += (i ? "; " : " ") + a.name + " " + dns_type_name(a.rtype) + " " + a.rdata_text;
      }
    }
  }
  return s;
}

}  // namespace

std::string render_packet_line(const PcapPacket& p, TsResolution res) {
  const auto& l = p.layers;
  std::string src = "?", dst = "?", proto = "RAW", summary;
  if (l.eth) {
    src = l.eth->src_mac;
    dst = l.eth->dst_mac;
    char et[16];
    std::snprintf(et, sizeof et, "ETH-0x%04x", l.eth->ethertype);
    proto = l.eth->ethertype == 0x0806 ? "ARP" : et;
  }
  if (l.ip) {
    const auto sport = l.transport ? l.transport->src_port : std::nullopt;
    const auto dport = l.transport ? l.transport->dst_port : std::nullopt;
    src = endpoint(l.ip->src_addr, l.ip->version, sport);
    dst = endpoint(l.ip->dst_addr, l.ip->version, dport);
    proto = (l.ip->version == 6 ? "IPv6/" : "IPv4/") + std::to_string(l.ip->protocol);
  }
  if (l.transport) {
    switch (l.transport->kind) {
      case TransportKind::Tcp: proto = "TCP"; summary = "len " + std::to_string(p.original_len); break;
      case TransportKind::Udp: proto = "UDP"; summary = "len " + std::to_string(p.original_len); break;
      case TransportKind::Icmp: {
        const auto type = l.transport->icmp_type.value_or(0);
        const auto code = l.transport->icmp_code.value_or(0);
        if (l.ip && l.ip->version == 6) {
          proto = "ICMPv6";
          summary = "type " + std::to_string(type) + " code " + std::to_string(code);
        } else {
          proto = "ICMP";
          summary = icmp_type_name(type);
          const auto cname = icmp_code_name(type, code);
          if (!cname.empty()) summary += " (" + cname + ")";
        }
        break;
      }
    }
  }
  if (l.dns) {
    proto = "DNS";
    summary = dns_summary(*l.dns);
  }
  if (summary.empty()) summary = "len " + std::to_string(p.original_len);
  std::string line = "#" + std::to_string(p.index) + " " + timestamp_text(p.ts_sec, p.ts_frac, res) + " " + src +
                     "->" + dst + " " + proto + " " + summary;
  if (l.raw_note) line += " [" + *l.raw_note + "]";
  return line;
}

std::vector<TextChunk> render_packets(const PcapFile& pcap, std::size_t budget) {
  std::vector<std::string> lines;
  lines.reserve(pcap.packets.size());
  for (const auto& p : pcap.packets) lines.push_back(render_packet_line(p, pcap.ts_resolution) + "\n");
  auto chunks = pack_units(lines, budget);
  for (auto& c : chunks) {
    c.first = pcap.packets[c.first].index;
    c.last = pcap.packets[c.last].index;
  }
  return chunks;
}

}  // namespace scout
