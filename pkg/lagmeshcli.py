import lagmesh.app


if __name__ == '__main__':
    lagmesh.app.main()
