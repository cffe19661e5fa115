"""Memory image semantics: byte enables, hex loading, tohost, uninit policy."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vercore.memory import (MalformedHexLine, MemoryImage, MisalignedAccess,
                            load_hex)


class TestWriteBytes:
    def test_single_lane(self):
        img = MemoryImage()
        img.write_bytes(0x100, 0x00AB0000, 0b0100)
        assert img.read_byte(0x102) == 0xAB
        assert img.read_byte(0x100) == 0 and img.read_byte(0x103) == 0
        assert img.read_word(0x100) == 0x00AB0000

    def test_full_word(self):
        img = MemoryImage()
        img.write_bytes(0x100, 0x11223344, 0b1111)
        assert img.read_word(0x100) == 0x11223344

    def test_no_enables_no_change(self):
        img = MemoryImage()
        img.write_bytes(0x100, 0xDEADBEEF, 0b1111)
        img.write_bytes(0x100, 0x00000000, 0b0000)
        assert img.read_word(0x100) == 0xDEADBEEF

    def test_misaligned_rejected(self):
        img = MemoryImage()
        with pytest.raises(MisalignedAccess):
            img.write_bytes(0x101, 0, 0b1111)
        with pytest.raises(MisalignedAccess):
            img.read_word(0x102)

    @given(st.lists(st.tuples(st.integers(0, 63),
                              st.integers(0, 0xFFFFFFFF),
                              st.integers(0, 15)),
                    max_size=60))
    @settings(max_examples=300)
    def test_matches_bytearray_model(self, ops):
        """Byte-enable writes against a brute-force flat byte model."""
        img = MemoryImage()
        model = bytearray(256)
        for word_idx, data, byte_en in ops:
            addr = word_idx * 4
            img.write_bytes(addr, data, byte_en)
            for i in range(4):
                if byte_en & (1 << i):
                    model[addr + i] = (data >> (8 * i)) & 0xFF
        for word_idx in range(64):
            expected = int.from_bytes(model[word_idx * 4:word_idx * 4 + 4],
                                      "little")
            assert img.read_word(word_idx * 4) == expected


class TestTohost:
    def test_full_word_store_signals(self):
        img = MemoryImage(tohost_addr=0x80001000)
        assert img.write_bytes(0x80001000, 42, 0b1111) == 42

    def test_partial_store_does_not_signal(self):
        img = MemoryImage(tohost_addr=0x80001000)
        assert img.write_bytes(0x80001000, 42, 0b0011) is None

    def test_other_address_does_not_signal(self):
        img = MemoryImage(tohost_addr=0x80001000)
        assert img.write_bytes(0x80001004, 42, 0b1111) is None

    def test_no_tohost_configured(self):
        img = MemoryImage()
        assert img.write_bytes(0x100, 42, 0b1111) is None


class TestUninitialized:
    def test_word_reads_zero_and_counts(self):
        img = MemoryImage()
        assert img.read_word(0x4000) == 0
        assert img.uninit_reads == 1

    def test_initialized_not_counted(self):
        img = MemoryImage()
        img.write_bytes(0x100, 1, 0b1111)
        img.read_word(0x100)
        assert img.uninit_reads == 0

    def test_partial_initialization_detected(self):
        img = MemoryImage()
        img.write_byte(0x100, 0xFF)
        assert img.is_initialized(0x100)
        assert not img.is_initialized(0x100, 4)


class TestClone:
    def test_independent(self):
        img = MemoryImage(tohost_addr=0x9000)
        img.write_bytes(0x100, 0xAABBCCDD, 0b1111)
        dup = img.clone()
        dup.write_bytes(0x100, 0, 0b1111)
        assert img.read_word(0x100) == 0xAABBCCDD
        assert dup.read_word(0x100) == 0
        assert dup.tohost_addr == 0x9000


class TestLoadHex:
    def test_words_little_endian(self):
        img = load_hex("00000093\nDEADBEEF\n", base=0x2000)
        assert img.read_byte(0x2000) == 0x93
        assert img.read_word(0x2000) == 0x00000093
        assert img.read_word(0x2004) == 0xDEADBEEF

    def test_at_directive(self):
        img = load_hex("@2100\nDEADBEEF\n")
        assert img.read_word(0x2100) == 0xDEADBEEF

    def test_comments_and_blanks(self):
        img = load_hex("// header\n11112222 // trailing\n\n33334444\n",
                       base=0)
        assert img.read_word(0) == 0x11112222
        assert img.read_word(4) == 0x33334444

    @pytest.mark.parametrize("text", ["xyzzy\n", "@zz\n", "123456789\n"])
    def test_malformed(self, text):
        with pytest.raises(MalformedHexLine):
            load_hex(text)
