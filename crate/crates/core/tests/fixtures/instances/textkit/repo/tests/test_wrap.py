from textkit.wrap import shorten


def test_short_text_untouched():
    assert shorten("abc", 5) == "abc"
