def test_blend():
    c = blend(Color((0, 0, 0)), Color((2, 2, 2)))
    assert c.rgb == (1, 1, 1)
